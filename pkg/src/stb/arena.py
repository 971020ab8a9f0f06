"""Bot-bot conversation sampling from human seed exchanges.

Each pair of endpoints produces a fixed number of conversations: the first
exchange is a distinct seed drawn from the human test set, after which the
slot-0 bot speaks first in every exchange. Builtin toy bots (echo, canned,
unigram) make the whole pipeline runnable without external models.
"""

from __future__ import annotations

from dataclasses import dataclass

import httpx
import numpy as np

from .corpus import (Conversation, Corpus, EntityDescriptor, Exchange, Turn,
                     extract_seed)
from .errors import SamplingError, StbError, TransportError

DEFAULT_TIMEOUT = 30.0
RETRIES_PER_TURN = 3

BUILTIN_BOTS = ("echo", "canned", "unigram")


@dataclass(frozen=True)
class UnigramModel:
    words: tuple[str, ...]
    probs: tuple[float, ...]

    @staticmethod
    def train(corpus: Corpus) -> "UnigramModel":
        counts: dict[str, int] = {}
        for conv in corpus.conversations:
            for ex in conv.exchanges:
                for text in ex.texts:
                    for word in text.split():
                        counts[word] = counts.get(word, 0) + 1
        if not counts:
            raise StbError("cannot train a unigram bot on an empty corpus")
        words = tuple(sorted(counts))
        total = sum(counts.values())
        return UnigramModel(words=words, probs=tuple(counts[w] / total for w in words))


@dataclass(frozen=True)
class BotEndpoint:
    """A competitor: either an HTTP endpoint or a builtin toy bot."""

    system_name: str
    url: str | None = None
    builtin: str | None = None
    replies: tuple[str, ...] = ()          # canned
    model: UnigramModel | None = None      # unigram
    timeout: float = DEFAULT_TIMEOUT

    def __post_init__(self):
        if (self.url is None) == (self.builtin is None):
            raise StbError(f"endpoint {self.system_name!r} needs exactly one of url/builtin")
        if self.builtin is not None and self.builtin not in BUILTIN_BOTS:
            raise StbError(f"unknown builtin bot {self.builtin!r} (have {BUILTIN_BOTS})")
        if self.builtin == "canned" and not self.replies:
            raise StbError(f"canned bot {self.system_name!r} needs a reply list")
        if self.builtin == "unigram" and self.model is None:
            raise StbError(f"unigram bot {self.system_name!r} needs a trained model")


@dataclass(frozen=True)
class SamplingConfig:
    seed_corpus: Corpus
    conversations_per_pair: int = 45
    target_exchanges: int = 5
    rng_seed: int = 0

    def __post_init__(self):
        if self.conversations_per_pair <= 0 or self.target_exchanges <= 0:
            raise StbError("conversations_per_pair and target_exchanges must be positive")
        ks = self.seed_corpus.segment_lengths
        if ks and self.target_exchanges < ks[-1]:
            raise StbError(
                f"target_exchanges {self.target_exchanges} below max segment length {ks[-1]}")


def respond(endpoint: BotEndpoint, history: list[tuple[str, str]],
            rng: np.random.Generator | None = None) -> str:
    """One utterance from the endpoint. History entries are (speaker, text)
    with speaker 'self' or 'other' from the endpoint's perspective."""
    if not history:
        raise StbError("history must be non-empty")
    if endpoint.builtin == "echo":
        return history[-1][1]
    if endpoint.builtin == "canned":
        n_self = sum(1 for speaker, _ in history if speaker == "self")
        return endpoint.replies[n_self % len(endpoint.replies)]
    if endpoint.builtin == "unigram":
        rng = rng or np.random.default_rng(0)
        length = int(rng.integers(4, 12))
        model = endpoint.model
        idx = rng.choice(len(model.words), size=length, p=model.probs)
        return " ".join(model.words[i] for i in idx)

    payload = {"history": [{"speaker": s, "text": t} for s, t in history]}
    try:
        response = httpx.post(endpoint.url, json=payload, timeout=endpoint.timeout)
        response.raise_for_status()
        text = response.json().get("text", "")
    except httpx.HTTPError as exc:
        raise TransportError(f"endpoint {endpoint.system_name!r}: {exc}") from exc
    except ValueError as exc:
        raise TransportError(f"endpoint {endpoint.system_name!r} returned invalid JSON") from exc
    if not isinstance(text, str) or not text.strip():
        raise TransportError(f"endpoint {endpoint.system_name!r} returned an empty utterance")
    return text


def _respond_with_retries(endpoint: BotEndpoint, history, rng) -> str:
    last: Exception | None = None
    for _ in range(RETRIES_PER_TURN):
        try:
            return respond(endpoint, history, rng)
        except TransportError as exc:
            last = exc
    raise TransportError(f"endpoint {endpoint.system_name!r} failed {RETRIES_PER_TURN} times: {last}")


def sample_pair_conversations(a: BotEndpoint, b: BotEndpoint,
                              config: SamplingConfig) -> list[Conversation]:
    """Generate config.conversations_per_pair conversations between a and b,
    each seeded by a distinct human test-set exchange (slot 0 text to a,
    slot 1 to b) and continued to target_exchanges exchanges."""
    corpus = config.seed_corpus
    n = config.conversations_per_pair
    if len(corpus.conversations) < n:
        raise StbError(
            f"seed corpus has {len(corpus.conversations)} conversations, need {n}")
    rng = np.random.default_rng(config.rng_seed)
    seed_idx = rng.permutation(len(corpus.conversations))[:n]

    conversations: list[Conversation] = []
    failures: list[str] = []
    entities = (EntityDescriptor("bot", a.system_name), EntityDescriptor("bot", b.system_name))
    for idx in seed_idx:
        seed = extract_seed(corpus.conversations[idx])
        turns: list[tuple[int, str]] = [(0, seed.exchange.texts[0]), (1, seed.exchange.texts[1])]
        try:
            while len(turns) < 2 * config.target_exchanges:
                slot = len(turns) % 2
                bot = a if slot == 0 else b
                history = [("self" if t_slot == slot else "other", text) for t_slot, text in turns]
                turns.append((slot, _respond_with_retries(bot, history, rng)))
        except TransportError as exc:
            failures.append(f"seed {seed.source_id}: {exc}")
            continue
        exchanges = tuple(
            Exchange(index=i, turns=(Turn(0, turns[2 * i][1]), Turn(1, turns[2 * i + 1][1])))
            for i in range(config.target_exchanges)
        )
        conversations.append(
            Conversation(
                id=f"{a.system_name}--{b.system_name}--{seed.source_id}",
                domain=corpus.domain,
                entities=entities,
                exchanges=exchanges,
                seed_source=seed.source_id,
            )
        )
    if failures:
        err = SamplingError(
            f"pair ({a.system_name}, {b.system_name}): only {len(conversations)} of {n} "
            f"conversations succeeded", failures=failures)
        err.conversations = conversations  # partial result for salvage
        raise err
    return conversations


def sample_tournament(endpoints: list[BotEndpoint], config: SamplingConfig) -> list[Conversation]:
    """All unordered pairs; per-pair RNG streams derived from the base seed."""
    if len({e.system_name for e in endpoints}) != len(endpoints):
        raise StbError("endpoint system names must be unique within a tournament")
    conversations = []
    pair_index = 0
    for i, a in enumerate(endpoints):
        for b in endpoints[i + 1:]:
            pair_config = SamplingConfig(
                seed_corpus=config.seed_corpus,
                conversations_per_pair=config.conversations_per_pair,
                target_exchanges=config.target_exchanges,
                rng_seed=int(np.random.default_rng([config.rng_seed, pair_index]).integers(2**31)),
            )
            conversations.extend(sample_pair_conversations(a, b, pair_config))
            pair_index += 1
    return conversations
