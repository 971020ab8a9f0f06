"""Meta-analyses: ranking stability, label agreement, annotator quality,
segment-length effects, and timing statistics."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from statistics import mean, median
from typing import Mapping, Sequence

import numpy as np

from .annotation import AnnotationRecord, EntityLabel
from .batching import Plan
from .errors import StbError
from .ranking import segment_winner

LABELS = (EntityLabel.BOT, EntityLabel.UNSURE, EntityLabel.HUMAN)


@dataclass(frozen=True)
class StabilityCurve:
    ns: tuple[int, ...]
    proportions: tuple[float, ...]  # share of the modal ranking per n
    reps: int

    def to_dict(self) -> dict:
        return {"ns": list(self.ns), "proportions": list(self.proportions), "reps": self.reps}


def _pair_conversation_tallies(records: Sequence[AnnotationRecord], plan: Plan,
                               exclude: str | None = None):
    """Per pair: (system pair, conversation ids, win-count matrix [C, 2])."""
    tallies: dict[tuple[str, str], dict[str, list[int]]] = {}
    for rec in records:
        item = plan.items_by_id.get(rec.item_id)
        if item is None or item.kind != "bot_bot":
            continue
        if exclude is not None and exclude in item.systems:
            continue
        a, b = sorted(item.systems)
        per_conv = tallies.setdefault((a, b), {})
        counts = per_conv.setdefault(item.conversation_id, [0, 0])
        outcome = segment_winner(rec, plan)
        if outcome == "tie":
            continue
        winner = item.systems[0] if outcome == "first" else item.systems[1]
        counts[0 if winner == a else 1] += 1
    out = []
    for (a, b), per_conv in sorted(tallies.items()):
        conv_ids = sorted(per_conv)
        matrix = np.array([per_conv[c] for c in conv_ids], dtype=float)
        out.append(((a, b), conv_ids, matrix))
    return out


def stability_curve(records: Sequence[AnnotationRecord], plan: Plan,
                    n_range: Sequence[int], reps: int = 1000, rng_seed: int = 0,
                    _exclude: str | None = None) -> StabilityCurve:
    """For each n: subsample n conversations per pair (without replacement),
    rank systems by aggregate win rate, and report how often the modal
    ranking occurs across repetitions."""
    ns = sorted(set(int(n) for n in n_range))
    if not ns:
        raise StbError("empty n_range")
    pair_data = _pair_conversation_tallies(records, plan, exclude=_exclude)
    if not pair_data:
        raise StbError("no bot-bot annotations")
    systems = sorted({s for (a, b), _, _ in pair_data for s in (a, b)})
    index = {s: i for i, s in enumerate(systems)}
    for (a, b), conv_ids, _ in pair_data:
        if len(conv_ids) < ns[-1]:
            raise StbError(
                f"pair ({a}, {b}) has {len(conv_ids)} conversations, below max n {ns[-1]}")

    proportions = []
    for n in ns:
        counter: Counter[tuple[str, ...]] = Counter()
        for rep in range(reps):
            rng = np.random.default_rng([rng_seed, n, rep])
            wins = np.zeros(len(systems))
            decisive = np.zeros(len(systems))
            for (a, b), conv_ids, matrix in pair_data:
                chosen = rng.permutation(len(conv_ids))[:n]
                wa, wb = matrix[chosen].sum(axis=0)
                wins[index[a]] += wa
                wins[index[b]] += wb
                decisive[index[a]] += wa + wb
                decisive[index[b]] += wa + wb
            # neutral rate when a system drew no decisive comparison at tiny n
            wr = np.where(decisive > 0, wins / np.maximum(decisive, 1), 0.5)
            ranking = tuple(s for _, s in sorted(zip(-wr, systems)))
            counter[ranking] += 1
        proportions.append(counter.most_common(1)[0][1] / reps)
    return StabilityCurve(ns=tuple(ns), proportions=tuple(proportions), reps=reps)


def min_stable_n(curve: StabilityCurve, threshold: float = 0.95) -> int | None:
    """Smallest n whose modal-ranking share reaches the threshold."""
    if not curve.ns:
        raise StbError("empty stability curve")
    for n, prop in zip(curve.ns, curve.proportions):
        if prop >= threshold:
            return n
    return None


def leave_one_out_stability(records: Sequence[AnnotationRecord], plan: Plan,
                            n_range: Sequence[int], reps: int = 1000,
                            rng_seed: int = 0) -> dict[str, StabilityCurve]:
    """Stability curves for each pool with one system removed."""
    systems = sorted({s for i in plan.items_by_id.values() if i.kind == "bot_bot" for s in i.systems})
    if len(systems) < 3:
        raise StbError("leave-one-out needs at least three systems")
    return {
        s: stability_curve(records, plan, n_range, reps=reps, rng_seed=rng_seed, _exclude=s)
        for s in systems
    }


@dataclass(frozen=True)
class AgreementTable:
    """Conditional label agreement: given that one of the two annotators of an
    item assigns label L to an entity, the share of cases where the other one
    does too (random labels over three classes land at 1/3)."""

    per_label: Mapping[str, Mapping[str, float | None]]  # system -> label -> rate
    identical_rate: Mapping[str, float]                   # both entities same label
    excluded_items: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "per_label": {s: dict(v) for s, v in self.per_label.items()},
            "identical_rate": dict(self.identical_rate),
            "excluded_items": list(self.excluded_items),
        }


def label_agreement(records: Sequence[AnnotationRecord], plan: Plan) -> AgreementTable:
    by_item: dict[str, list[AnnotationRecord]] = {}
    for rec in records:
        if rec.item_id in plan.items_by_id:
            by_item.setdefault(rec.item_id, []).append(rec)

    num: dict[str, Counter] = {}
    den: dict[str, Counter] = {}
    identical_num: Counter = Counter()
    identical_den: Counter = Counter()
    excluded = []
    for item_id, recs in sorted(by_item.items()):
        if len(recs) != 2:
            excluded.append(item_id)
            continue
        item = plan.items_by_id[item_id]
        r1, r2 = sorted(recs, key=lambda r: r.worker_id)
        for slot in (0, 1):
            system = item.systems[slot]
            l1, l2 = r1.labels[slot], r2.labels[slot]
            for lab in LABELS:
                hits = (l1 is lab) + (l2 is lab)
                if hits:
                    den.setdefault(system, Counter())[lab.value] += hits
                    if hits == 2:
                        num.setdefault(system, Counter())[lab.value] += 2
        for rec in (r1, r2):
            same = rec.labels[0] is rec.labels[1]
            for system in set(item.systems):
                identical_den[system] += 1
                identical_num[system] += int(same)

    per_label = {
        system: {
            lab.value: (num.get(system, Counter())[lab.value] / den[system][lab.value]
                        if den[system][lab.value] else None)
            for lab in LABELS
        }
        for system in sorted(den)
    }
    identical = {s: identical_num[s] / identical_den[s] for s in sorted(identical_den)}
    return AgreementTable(per_label=per_label, identical_rate=identical,
                          excluded_items=tuple(excluded))


@dataclass(frozen=True)
class CorrectnessReport:
    scores: Mapping[str, float]
    retained: tuple[str, ...]
    filtered: tuple[str, ...]
    threshold: float

    def to_dict(self) -> dict:
        return {
            "scores": dict(self.scores),
            "retained": list(self.retained),
            "filtered": list(self.filtered),
            "threshold": self.threshold,
        }


def annotator_correctness(records: Sequence[AnnotationRecord], plan: Plan,
                          threshold: float = 0.75) -> CorrectnessReport:
    """Share of entity judgments matching the ground-truth kind; 'unsure'
    counts as incorrect so a random binary guesser scores 0.5."""
    correct: Counter = Counter()
    total: Counter = Counter()
    for rec in records:
        item = plan.items_by_id.get(rec.item_id)
        if item is None:
            continue
        truth = EntityLabel.BOT if item.kind == "bot_bot" else EntityLabel.HUMAN
        for slot in (0, 1):
            total[rec.worker_id] += 1
            if rec.labels[slot] is truth:
                correct[rec.worker_id] += 1
    if not total:
        raise StbError("no judgments to score")
    scores = {w: correct[w] / total[w] for w in sorted(total)}
    retained = tuple(w for w, s in scores.items() if s >= threshold)
    filtered = tuple(w for w, s in scores.items() if s < threshold)
    return CorrectnessReport(scores=scores, retained=retained, filtered=filtered,
                             threshold=threshold)


@dataclass(frozen=True)
class SegmentRow:
    win_rate: float | None
    human_rate: float
    tie_rate: float
    n_annotations: int


@dataclass(frozen=True)
class SegmentStats:
    rows: Mapping[tuple[str, int], SegmentRow]
    notices: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "rows": [
                {"system": s, "k": k, "win_rate": r.win_rate, "human_rate": r.human_rate,
                 "tie_rate": r.tie_rate, "n_annotations": r.n_annotations}
                for (s, k), r in sorted(self.rows.items())
            ],
            "notices": list(self.notices),
        }


def segment_stats(records: Sequence[AnnotationRecord], plan: Plan) -> SegmentStats:
    """Per (system, segment length): win rate, human-classification rate, tie rate."""
    wins: Counter = Counter()
    losses: Counter = Counter()
    ties: Counter = Counter()
    human: Counter = Counter()
    judgments: Counter = Counter()
    for rec in records:
        item = plan.items_by_id.get(rec.item_id)
        if item is None or item.kind != "bot_bot":
            continue
        outcome = segment_winner(rec, plan)
        for slot in (0, 1):
            key = (item.systems[slot], item.k)
            judgments[key] += 1
            if rec.labels[slot] is EntityLabel.HUMAN:
                human[key] += 1
            if outcome == "tie":
                ties[key] += 1
            elif (outcome == "first") == (slot == 0):
                wins[key] += 1
            else:
                losses[key] += 1

    rows: dict[tuple[str, int], SegmentRow] = {}
    notices = []
    systems = sorted({s for s, _ in judgments})
    for system in systems:
        for k in plan.config.segment_lengths:
            key = (system, k)
            if judgments[key] == 0:
                notices.append(f"no annotations for {system} at k={k}")
                continue
            decisive = wins[key] + losses[key]
            wr = wins[key] / decisive if decisive else None
            if wr is None:
                notices.append(f"win rate undefined for {system} at k={k} (all ties)")
            rows[key] = SegmentRow(
                win_rate=wr,
                human_rate=human[key] / judgments[key],
                tie_rate=ties[key] / judgments[key],
                n_annotations=judgments[key],
            )
    return SegmentStats(rows=rows, notices=tuple(notices))


@dataclass(frozen=True)
class TimingRow:
    mean_seconds: float
    median_seconds: float
    n: int


def timing_stats(records: Sequence[AnnotationRecord], plan: Plan) -> dict[str, TimingRow]:
    """Mean and median annotation duration per domain."""
    by_domain: dict[str, list[float]] = {}
    for rec in records:
        item = plan.items_by_id.get(rec.item_id)
        if item is None:
            continue
        by_domain.setdefault(item.domain, []).append(rec.duration_seconds)
    return {
        domain: TimingRow(mean_seconds=mean(vals), median_seconds=median(vals), n=len(vals))
        for domain, vals in sorted(by_domain.items())
    }
