"""Annotation workload construction: segment items, batches, and the claim ledger.

Batch constraints mirror the crowdsourcing protocol: a batch never contains
two segments of the same conversation, every item is judged by a fixed number
of annotators, and a worker is capped at a fixed number of batches and never
sees the same conversation twice.
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import Corpus
from .errors import PlanError

DEFAULT_BATCH_SIZE = 20
DEFAULT_ANNOTATORS_PER_ITEM = 2
DEFAULT_MAX_BATCHES_PER_WORKER = 3
ASSEMBLY_RESTARTS = 1000


@dataclass(frozen=True)
class SegmentItem:
    """One annotation task: the first k exchanges of one conversation.

    `systems` (slot 0, slot 1) and the rendered `exchanges` are embedded so a
    plan file is self-contained for both serving and analysis.
    """

    item_id: str
    conversation_id: str
    k: int
    kind: str  # "bot_bot" | "human_human"
    systems: tuple[str, str]
    domain: str
    exchanges: tuple[tuple[str, str], ...]

    def __post_init__(self):
        if len(self.exchanges) != self.k:
            raise PlanError(f"item {self.item_id}: expected {self.k} exchanges, got {len(self.exchanges)}")


@dataclass(frozen=True)
class Batch:
    batch_id: str
    items: tuple[SegmentItem, ...]

    @property
    def conversation_ids(self) -> frozenset[str]:
        return frozenset(item.conversation_id for item in self.items)


@dataclass(frozen=True)
class PlanConfig:
    batch_size: int = DEFAULT_BATCH_SIZE
    annotators_per_item: int = DEFAULT_ANNOTATORS_PER_ITEM
    max_batches_per_worker: int = DEFAULT_MAX_BATCHES_PER_WORKER
    human_mix: float = 0.2
    rng_seed: int = 0
    segment_lengths: tuple[int, ...] = ()


@dataclass(frozen=True)
class Plan:
    config: PlanConfig
    batches: tuple[Batch, ...]

    @property
    def items_by_id(self) -> dict[str, SegmentItem]:
        if not hasattr(self, "_items_by_id"):
            object.__setattr__(self, "_items_by_id", {i.item_id: i for b in self.batches for i in b.items})
        return self._items_by_id  # type: ignore[attr-defined]

    @property
    def batch_of_item(self) -> dict[str, str]:
        if not hasattr(self, "_batch_of_item"):
            object.__setattr__(
                self, "_batch_of_item",
                {i.item_id: b.batch_id for b in self.batches for i in b.items},
            )
        return self._batch_of_item  # type: ignore[attr-defined]

    def bot_systems(self) -> list[str]:
        return sorted({s for i in self.items_by_id.values() if i.kind == "bot_bot" for s in i.systems})


def build_items(bot_corpus: Corpus, human_corpus: Corpus | None, human_mix: float,
                rng_seed: int = 0) -> list[SegmentItem]:
    """Expand conversations into per-(conversation, k) items with a human mix.

    Human conversations are sampled without replacement and each expanded to
    all segment lengths, so the number of human items is rounded to a whole
    number of conversations while staying close to the requested mix.
    """
    if not 0 <= human_mix < 1:
        raise PlanError(f"human_mix must be in [0, 1), got {human_mix}")
    ks = bot_corpus.segment_lengths
    items: list[SegmentItem] = []
    for conv in bot_corpus.conversations:
        if conv.kind != "bot_bot":
            raise PlanError(f"bot corpus contains a non bot-bot conversation {conv.id!r}")
        items.extend(_items_for(conv, ks))
    n_bot = len(items)

    if human_mix > 0:
        if human_corpus is None or not human_corpus.conversations:
            raise PlanError("human_mix > 0 requires a non-empty human corpus")
        target = human_mix * n_bot / (1.0 - human_mix)
        n_convs = round(target / len(ks))
        if n_convs == 0 and target > 0:
            n_convs = 1
        if n_convs > len(human_corpus.conversations):
            raise PlanError(
                f"need {n_convs} human conversations for mix {human_mix}, "
                f"corpus has {len(human_corpus.conversations)}"
            )
        rng = np.random.default_rng(rng_seed)
        chosen = rng.choice(len(human_corpus.conversations), size=n_convs, replace=False)
        for idx in sorted(chosen):
            conv = human_corpus.conversations[idx]
            if conv.kind != "human_human":
                raise PlanError(f"human corpus contains a non human-human conversation {conv.id!r}")
            items.extend(_items_for(conv, ks))
    return items


def _items_for(conv, ks) -> list[SegmentItem]:
    out = []
    for k in ks:
        out.append(
            SegmentItem(
                item_id=f"{conv.id}::k{k}",
                conversation_id=conv.id,
                k=k,
                kind=conv.kind,
                systems=(conv.entities[0].system_name, conv.entities[1].system_name),
                domain=conv.domain,
                exchanges=tuple(ex.texts for ex in conv.exchanges[:k]),
            )
        )
    return out


def assemble_batches(items: list[SegmentItem], batch_size: int = DEFAULT_BATCH_SIZE,
                     rng_seed: int = 0) -> list[Batch]:
    """Partition items into batches with no two items sharing a conversation.

    Randomized greedy: conversations are placed largest-first, each of a
    conversation's items going to a distinct batch with the most remaining
    room (human items are additionally spread so every batch gets one while
    supplies last). Restarts with a fresh shuffle on the rare dead end.
    """
    if not items:
        raise PlanError("no items to batch")
    ids = [i.item_id for i in items]
    if len(set(ids)) != len(ids):
        raise PlanError("duplicate item ids")

    by_conv: dict[str, list[SegmentItem]] = {}
    for item in items:
        by_conv.setdefault(item.conversation_id, []).append(item)
    n = len(items)
    max_count = max(len(g) for g in by_conv.values())
    n_batches = max(math.ceil(n / batch_size), max_count)
    if n_batches == math.ceil(n / batch_size):
        capacities = [batch_size] * (n_batches - 1) + [n - batch_size * (n_batches - 1)]
    else:
        base, rem = divmod(n, n_batches)
        capacities = [base + 1] * rem + [base] * (n_batches - rem)

    rng = np.random.default_rng(rng_seed)
    groups = sorted(by_conv.values(), key=lambda g: len(g), reverse=True)
    human_groups = [g for g in groups if g[0].kind == "human_human"]
    bot_groups = [g for g in groups if g[0].kind != "human_human"]

    for _attempt in range(ASSEMBLY_RESTARTS):
        # shuffle, then stable-sort: humans first, largest conversations first,
        # random order within equal-size runs
        order = [human_groups[i] for i in rng.permutation(len(human_groups))]
        order += [bot_groups[i] for i in rng.permutation(len(bot_groups))]
        order.sort(key=lambda g: (g[0].kind != "human_human", -len(g)))

        free = list(capacities)
        used: list[set[str]] = [set() for _ in range(n_batches)]
        human_load = [0] * n_batches
        slots: list[list[SegmentItem]] = [[] for _ in range(n_batches)]
        ok = True
        for group in order:
            conv_id = group[0].conversation_id
            is_human = group[0].kind == "human_human"
            candidates = [b for b in range(n_batches) if free[b] > 0 and conv_id not in used[b]]
            if len(candidates) < len(group):
                ok = False
                break
            if is_human:
                candidates.sort(key=lambda b: (human_load[b], -free[b], rng.random()))
            else:
                candidates.sort(key=lambda b: (-free[b], rng.random()))
            for item, b in zip(group, candidates):
                slots[b].append(item)
                free[b] -= 1
                used[b].add(conv_id)
                if is_human:
                    human_load[b] += 1
        if ok:
            return [
                Batch(batch_id=f"batch-{i:04d}", items=tuple(batch_items))
                for i, batch_items in enumerate(slots)
            ]
    raise PlanError(f"could not satisfy batch constraints after {ASSEMBLY_RESTARTS} attempts")


@dataclass
class Violation:
    code: str
    detail: str


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, code: str, detail: str) -> None:
        self.violations.append(Violation(code, detail))


class AssignmentLedger:
    """Tracks batch claims; `claim` is atomic and keeps every invariant.

    Serializes claims through a lock so concurrent workers can never exceed
    the per-item annotator quota, the per-worker batch cap, or see the same
    conversation twice.
    """

    def __init__(self, batches: list[Batch] | tuple[Batch, ...],
                 annotators_per_item: int = DEFAULT_ANNOTATORS_PER_ITEM,
                 max_batches_per_worker: int = DEFAULT_MAX_BATCHES_PER_WORKER):
        self.batches = {b.batch_id: b for b in batches}
        self.batch_order = [b.batch_id for b in batches]
        self.annotators_per_item = annotators_per_item
        self.max_batches_per_worker = max_batches_per_worker
        self.claims: dict[str, list[str]] = {bid: [] for bid in self.batches}  # batch -> workers
        self.worker_batches: dict[str, list[str]] = {}
        self.worker_convs: dict[str, set[str]] = {}
        self.item_workers: dict[str, list[str]] = {
            i.item_id: [] for b in batches for i in b.items
        }
        self._lock = threading.Lock()

    def claim_next_batch(self, worker_id: str) -> Batch | None:
        with self._lock:
            mine = self.worker_batches.setdefault(worker_id, [])
            if len(mine) >= self.max_batches_per_worker:
                return None
            convs = self.worker_convs.setdefault(worker_id, set())
            # least-claimed first so fresh workers spread across batches
            for pos, bid in sorted(enumerate(self.batch_order),
                                   key=lambda e: (len(self.claims[e[1]]), e[0])):
                if len(self.claims[bid]) >= self.annotators_per_item:
                    continue
                if bid in mine:
                    continue
                batch = self.batches[bid]
                if batch.conversation_ids & convs:
                    continue
                self.claims[bid].append(worker_id)
                mine.append(bid)
                convs |= batch.conversation_ids
                for item in batch.items:
                    self.item_workers[item.item_id].append(worker_id)
                return batch
            return None

    def worker_has_item(self, worker_id: str, item_id: str) -> bool:
        workers = self.item_workers.get(item_id)
        return workers is not None and worker_id in workers

    def restore_claim(self, worker_id: str, batch_id: str) -> None:
        """Re-apply a persisted claim during log replay (no constraint checks)."""
        with self._lock:
            batch = self.batches[batch_id]
            self.claims[batch_id].append(worker_id)
            self.worker_batches.setdefault(worker_id, []).append(batch_id)
            self.worker_convs.setdefault(worker_id, set()).update(batch.conversation_ids)
            for item in batch.items:
                self.item_workers[item.item_id].append(worker_id)


def validate_plan(batches: list[Batch] | tuple[Batch, ...],
                  ledger: AssignmentLedger | None = None) -> ValidationReport:
    """Check every batching/ledger constraint; never raises."""
    report = ValidationReport()
    for batch in batches:
        conv_ids = [i.conversation_id for i in batch.items]
        for cid in sorted({c for c in conv_ids if conv_ids.count(c) > 1}):
            report.add("shared_conversation_in_batch",
                       f"batch {batch.batch_id} holds multiple segments of conversation {cid}")
    if ledger is None:
        return report
    for worker, bids in sorted(ledger.worker_batches.items()):
        if len(bids) > ledger.max_batches_per_worker:
            report.add("worker_over_max_batches",
                       f"worker {worker} claimed {len(bids)} batches (max {ledger.max_batches_per_worker})")
        seen_convs: dict[str, str] = {}
        for bid in bids:
            for cid in sorted(ledger.batches[bid].conversation_ids):
                if cid in seen_convs and seen_convs[cid] != bid:
                    report.add("worker_conversation_repeat",
                               f"worker {worker} sees conversation {cid} in batches "
                               f"{seen_convs[cid]} and {bid}")
                else:
                    seen_convs[cid] = bid
    for item_id, workers in sorted(ledger.item_workers.items()):
        if len(set(workers)) != ledger.annotators_per_item:
            report.add("annotator_count",
                       f"item {item_id} has {len(set(workers))} annotators "
                       f"(expected {ledger.annotators_per_item})")
    return report


# -- plan file --


def plan_to_dict(plan: Plan) -> dict:
    cfg = plan.config
    return {
        "config": {
            "batch_size": cfg.batch_size,
            "annotators_per_item": cfg.annotators_per_item,
            "max_batches_per_worker": cfg.max_batches_per_worker,
            "human_mix": cfg.human_mix,
            "rng_seed": cfg.rng_seed,
            "segment_lengths": list(cfg.segment_lengths),
        },
        "batches": [
            {
                "batch_id": b.batch_id,
                "items": [
                    {
                        "item_id": i.item_id,
                        "conversation_id": i.conversation_id,
                        "k": i.k,
                        "kind": i.kind,
                        "systems": list(i.systems),
                        "domain": i.domain,
                        "exchanges": [list(e) for e in i.exchanges],
                    }
                    for i in b.items
                ],
            }
            for b in plan.batches
        ],
    }


def plan_from_dict(obj: dict) -> Plan:
    cfg = obj["config"]
    batches = tuple(
        Batch(
            batch_id=b["batch_id"],
            items=tuple(
                SegmentItem(
                    item_id=i["item_id"],
                    conversation_id=i["conversation_id"],
                    k=int(i["k"]),
                    kind=i["kind"],
                    systems=tuple(i["systems"]),  # type: ignore[arg-type]
                    domain=i.get("domain", ""),
                    exchanges=tuple(tuple(e) for e in i["exchanges"]),
                )
                for i in b["items"]
            ),
        )
        for b in obj["batches"]
    )
    return Plan(
        config=PlanConfig(
            batch_size=int(cfg["batch_size"]),
            annotators_per_item=int(cfg["annotators_per_item"]),
            max_batches_per_worker=int(cfg["max_batches_per_worker"]),
            human_mix=float(cfg["human_mix"]),
            rng_seed=int(cfg["rng_seed"]),
            segment_lengths=tuple(int(k) for k in cfg["segment_lengths"]),
        ),
        batches=batches,
    )


def save_plan(plan: Plan, path: str | Path) -> None:
    Path(path).write_text(json.dumps(plan_to_dict(plan), ensure_ascii=False, indent=1), encoding="utf-8")


def load_plan(path: str | Path) -> Plan:
    return plan_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
