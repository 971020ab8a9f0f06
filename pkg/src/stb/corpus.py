"""Conversation data model, corpus ingestion, segmentation and overlap auditing.

A conversation is an ordered list of exchanges; each exchange holds one turn
per entity slot (slot 0 speaks first). Corpora are stored as JSONL, one
conversation per line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

from .errors import CorpusError, UndefinedRateError
from .jsonl import read_jsonl, write_jsonl

MAX_TURN_CHARS = 2000

_WS = re.compile(r"\s+")


def normalize_text(text: str) -> str:
    """Lowercase and collapse runs of whitespace to single spaces."""
    return _WS.sub(" ", text.strip().lower())


@dataclass(frozen=True)
class Turn:
    slot: int
    text: str

    def __post_init__(self):
        if self.slot not in (0, 1):
            raise CorpusError(f"turn slot must be 0 or 1, got {self.slot}")
        if not self.text.strip():
            raise CorpusError("turn text is empty")


@dataclass(frozen=True)
class Exchange:
    index: int
    turns: tuple[Turn, Turn]

    def __post_init__(self):
        if len(self.turns) != 2 or self.turns[0].slot != 0 or self.turns[1].slot != 1:
            raise CorpusError(f"exchange {self.index} must hold exactly slot-0 then slot-1 turns")

    @property
    def texts(self) -> tuple[str, str]:
        return (self.turns[0].text, self.turns[1].text)


@dataclass(frozen=True)
class EntityDescriptor:
    kind: str  # "bot" | "human"
    system_name: str

    def __post_init__(self):
        if self.kind not in ("bot", "human"):
            raise CorpusError(f"entity kind must be 'bot' or 'human', got {self.kind!r}")
        if self.kind == "human" and self.system_name != "human":
            raise CorpusError(f"human entities must have system_name 'human', got {self.system_name!r}")


@dataclass(frozen=True)
class Conversation:
    id: str
    domain: str
    entities: tuple[EntityDescriptor, EntityDescriptor]
    exchanges: tuple[Exchange, ...]
    seed_source: str | None = None

    def __post_init__(self):
        if len(self.entities) != 2:
            raise CorpusError("conversation needs exactly two entities", conversation_id=self.id)
        kinds = {e.kind for e in self.entities}
        if len(kinds) != 1:
            raise CorpusError(
                "mixed bot/human conversation (only bot-bot and human-human are allowed)",
                conversation_id=self.id,
            )
        for i, ex in enumerate(self.exchanges):
            if ex.index != i:
                raise CorpusError(
                    f"exchange indices must be contiguous from 0, got {ex.index} at position {i}",
                    conversation_id=self.id,
                )

    @property
    def kind(self) -> str:
        return "bot_bot" if self.entities[0].kind == "bot" else "human_human"

    def __len__(self) -> int:
        return len(self.exchanges)


@dataclass(frozen=True)
class Segment:
    """The first k exchanges of a conversation, as shown to one annotator."""

    conversation_id: str
    domain: str
    entities: tuple[EntityDescriptor, EntityDescriptor]
    exchanges: tuple[Exchange, ...]
    k: int


@dataclass(frozen=True)
class Corpus:
    domain: str
    conversations: tuple[Conversation, ...]
    segment_lengths: tuple[int, ...]

    def __post_init__(self):
        ks = self.segment_lengths
        if not ks or any(k <= 0 for k in ks) or any(a >= b for a, b in zip(ks, ks[1:])):
            raise CorpusError(f"segment lengths must be strictly ascending positive integers, got {ks}")
        for conv in self.conversations:
            if len(conv) < ks[-1]:
                raise CorpusError(
                    f"conversation has {len(conv)} exchanges, below max segment length {ks[-1]}",
                    conversation_id=conv.id,
                )

    def __len__(self) -> int:
        return len(self.conversations)


class Seed(NamedTuple):
    """First exchange of a human conversation plus its provenance."""

    exchange: Exchange
    source_id: str


# -- JSONL parsing --


def conversation_from_dict(obj: dict, line: int | None = None) -> Conversation:
    try:
        entities = tuple(
            EntityDescriptor(kind=e["kind"], system_name=e["system_name"]) for e in obj["entities"]
        )
        exchanges = []
        for i, pair in enumerate(obj["exchanges"]):
            if len(pair) != 2:
                raise CorpusError(f"exchange {i} must hold exactly two utterances", line=line)
            exchanges.append(
                Exchange(
                    index=i,
                    turns=(
                        Turn(slot=0, text=str(pair[0])[:MAX_TURN_CHARS]),
                        Turn(slot=1, text=str(pair[1])[:MAX_TURN_CHARS]),
                    ),
                )
            )
        return Conversation(
            id=str(obj["id"]),
            domain=str(obj["domain"]),
            entities=entities,  # type: ignore[arg-type]
            exchanges=tuple(exchanges),
            seed_source=obj.get("seed_source"),
        )
    except KeyError as exc:
        raise CorpusError(f"missing field {exc}", line=line) from exc


def conversation_to_dict(conv: Conversation) -> dict:
    obj = {
        "id": conv.id,
        "domain": conv.domain,
        "entities": [{"kind": e.kind, "system_name": e.system_name} for e in conv.entities],
        "exchanges": [list(ex.texts) for ex in conv.exchanges],
    }
    if conv.seed_source is not None:
        obj["seed_source"] = conv.seed_source
    return obj


def load_corpus(path: str | Path, segment_lengths: list[int] | tuple[int, ...]) -> Corpus:
    """Load a JSONL conversation file, validating every invariant.

    Conversations shorter than max(segment_lengths) are rejected with their
    line number: the sampling protocol controls length, so short ones
    indicate upstream bugs rather than data to be skipped.
    """
    ks = tuple(int(k) for k in segment_lengths)
    conversations: list[Conversation] = []
    domains: set[str] = set()
    for lineno, obj in read_jsonl(path):
        try:
            conv = conversation_from_dict(obj, line=lineno)
        except CorpusError:
            raise
        except Exception as exc:  # malformed JSON values, wrong shapes
            raise CorpusError(f"malformed conversation: {exc}", line=lineno) from exc
        if ks and len(conv) < ks[-1]:
            raise CorpusError(
                f"conversation has {len(conv)} exchanges, below max segment length {ks[-1]}",
                line=lineno,
                conversation_id=conv.id,
            )
        conversations.append(conv)
        domains.add(conv.domain)
    if len(domains) > 1:
        raise CorpusError(f"corpus mixes domains {sorted(domains)}")
    domain = domains.pop() if domains else ""
    return Corpus(domain=domain, conversations=tuple(conversations), segment_lengths=ks)


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    write_jsonl(path, (conversation_to_dict(c) for c in corpus.conversations))


# -- Operations --


def segment(conversation: Conversation, k: int) -> Segment:
    """Truncate a conversation to its first k exchanges."""
    if k <= 0 or k > len(conversation):
        raise CorpusError(
            f"segment length {k} out of range for a {len(conversation)}-exchange conversation",
            conversation_id=conversation.id,
        )
    return Segment(
        conversation_id=conversation.id,
        domain=conversation.domain,
        entities=conversation.entities,
        exchanges=conversation.exchanges[:k],
        k=k,
    )


def extract_seed(human_conversation: Conversation) -> Seed:
    """Return the opening exchange of a human conversation with provenance."""
    if not human_conversation.exchanges:
        raise CorpusError("cannot extract a seed from an empty conversation",
                          conversation_id=human_conversation.id)
    return Seed(exchange=human_conversation.exchanges[0], source_id=human_conversation.id)


def _exchange_keys(conv: Conversation) -> set[tuple[str, str]]:
    return {(normalize_text(ex.texts[0]), normalize_text(ex.texts[1])) for ex in conv.exchanges}


def training_overlap_rate(sampled: Corpus, training: Corpus) -> float:
    """Fraction of sampled conversations that copy at least one training exchange.

    Matching is exact on both turn texts of an exchange after lowercasing and
    whitespace collapsing; no fuzzy matching.
    """
    if not sampled.conversations:
        raise UndefinedRateError("overlap rate undefined for an empty sampled corpus")
    training_keys: set[tuple[str, str]] = set()
    for conv in training.conversations:
        training_keys |= _exchange_keys(conv)
    hits = sum(1 for conv in sampled.conversations if _exchange_keys(conv) & training_keys)
    return hits / len(sampled.conversations)
