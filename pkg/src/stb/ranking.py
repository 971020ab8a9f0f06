"""Pairwise win rates, chi-square significance, skill ratings and bootstrap rank ranges.

The win function orders entity labels human > unsure > bot; every annotator's
judgment of every segment counts as one comparison. Win rates exclude ties.
Rank ranges come from rerunning the rating chain on resampled annotation sets.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.stats import chi2 as chi2_dist

from .annotation import AnnotationRecord
from .batching import Plan
from .errors import StbError, UndefinedRateError
from .rating import TrueSkillConfig, run_rating_chain, run_rating_chains_vectorized


@dataclass(frozen=True)
class WinTally:
    system_a: str
    system_b: str
    wins_a: int
    wins_b: int
    ties: int

    def swapped(self) -> "WinTally":
        return WinTally(self.system_b, self.system_a, self.wins_b, self.wins_a, self.ties)

    @property
    def decisive(self) -> int:
        return self.wins_a + self.wins_b


@dataclass(frozen=True)
class SkillRating:
    system: str
    mu: float
    sigma: float


@dataclass(frozen=True)
class PairStat:
    tally: WinTally
    win_rate_a: float
    chi2: float
    p_value: float


@dataclass(frozen=True)
class RankingReport:
    systems: tuple[str, ...]                 # descending full-data skill
    ratings: tuple[SkillRating, ...]
    pair_stats: Mapping[tuple[str, str], PairStat]
    win_rate: Mapping[str, float]            # aggregate over all opponents
    rank_range: Mapping[str, tuple[int, int]]
    median_rank: Mapping[str, float]
    clusters: tuple[tuple[str, ...], ...]
    n_bootstrap: int
    rng_seed: int

    def to_dict(self) -> dict:
        return {
            "systems": list(self.systems),
            "ratings": [{"system": r.system, "mu": r.mu, "sigma": r.sigma} for r in self.ratings],
            "pairs": [
                {
                    "system_a": key[0],
                    "system_b": key[1],
                    "wins_a": st.tally.wins_a,
                    "wins_b": st.tally.wins_b,
                    "ties": st.tally.ties,
                    "win_rate_a": st.win_rate_a,
                    "chi2": st.chi2,
                    "p_value": st.p_value,
                    "significant": st.p_value < 0.05,
                }
                for key, st in sorted(self.pair_stats.items())
            ],
            "win_rate": dict(self.win_rate),
            "rank_range": {s: list(r) for s, r in self.rank_range.items()},
            "median_rank": dict(self.median_rank),
            "clusters": [list(c) for c in self.clusters],
            "n_bootstrap": self.n_bootstrap,
            "rng_seed": self.rng_seed,
        }


def segment_winner(record: AnnotationRecord, plan: Plan) -> str:
    """Return 'first', 'second' or 'tie' for one bot-bot annotation."""
    item = plan.items_by_id[record.item_id]
    if item.kind != "bot_bot":
        raise StbError(f"no competition defined for a {item.kind} item ({record.item_id})")
    l0, l1 = record.labels
    if l0.rank > l1.rank:
        return "first"
    if l1.rank > l0.rank:
        return "second"
    return "tie"


def _pair_key(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


def tally(records: Iterable[AnnotationRecord], plan: Plan, pair: tuple[str, str]) -> WinTally:
    """Count wins over all annotations of all segments between the pair."""
    a, b = pair
    wins = {a: 0, b: 0}
    ties = 0
    want = _pair_key(a, b)
    for rec in records:
        item = plan.items_by_id.get(rec.item_id)
        if item is None or item.kind != "bot_bot":
            continue
        if _pair_key(*item.systems) != want:
            continue
        outcome = segment_winner(rec, plan)
        if outcome == "tie":
            ties += 1
        elif outcome == "first":
            wins[item.systems[0]] += 1
        else:
            wins[item.systems[1]] += 1
    return WinTally(a, b, wins[a], wins[b], ties)


def win_rate(t: WinTally) -> float:
    """Decisive wins of system_a over system_b divided by decisive total."""
    if t.decisive == 0:
        raise UndefinedRateError(f"no decisive annotations between {t.system_a} and {t.system_b}")
    return t.wins_a / t.decisive


def chi_square(t: WinTally) -> tuple[float, float]:
    """1-df goodness of fit of the decisive win counts against an equal split."""
    if t.decisive == 0:
        raise UndefinedRateError(f"no decisive annotations between {t.system_a} and {t.system_b}")
    expected = t.decisive / 2.0
    stat = (t.wins_a - expected) ** 2 / expected + (t.wins_b - expected) ** 2 / expected
    return stat, float(chi2_dist.sf(stat, df=1))


# -- outcome extraction shared by the rating paths --


def pair_outcomes(records: Sequence[AnnotationRecord], plan: Plan) -> dict[tuple[str, str], np.ndarray]:
    """Per sorted pair: int8 outcomes (+1 first-of-pair wins, -1 second, 0 tie)."""
    out: dict[tuple[str, str], list[int]] = {}
    for rec in records:
        item = plan.items_by_id.get(rec.item_id)
        if item is None or item.kind != "bot_bot":
            continue
        key = _pair_key(*item.systems)
        res = segment_winner(rec, plan)
        if res == "tie":
            val = 0
        else:
            winner = item.systems[0] if res == "first" else item.systems[1]
            val = 1 if winner == key[0] else -1
        out.setdefault(key, []).append(val)
    return {k: np.asarray(v, dtype=np.int8) for k, v in sorted(out.items())}


def fit_trueskill(records: Sequence[AnnotationRecord], plan: Plan, rng_seed: int = 0,
                  cfg: TrueSkillConfig = TrueSkillConfig()) -> list[SkillRating]:
    """One rating update per annotation outcome, in seed-derived random order."""
    outcomes = pair_outcomes(records, plan)
    systems = sorted({s for key in outcomes for s in key})
    if not systems:
        raise StbError("no bot-bot annotations to rate")
    decisive = {s: 0 for s in systems}
    for (a, b), arr in outcomes.items():
        decisive[a] += int(np.sum(arr != 0))
        decisive[b] += int(np.sum(arr != 0))
    idle = [s for s, n in decisive.items() if n == 0]
    if idle:
        raise StbError(f"system(s) with no decisive annotations: {', '.join(idle)}")
    index = {s: i for i, s in enumerate(systems)}
    first, second, outcome = [], [], []
    for (a, b), arr in outcomes.items():
        first.extend([index[a]] * len(arr))
        second.extend([index[b]] * len(arr))
        outcome.extend(arr.tolist())
    order = np.random.default_rng(rng_seed).permutation(len(outcome))
    fi = np.asarray(first)[order]
    si = np.asarray(second)[order]
    out = np.asarray(outcome, dtype=np.int8)[order]
    mu, sigma = run_rating_chain(len(systems), fi, si, out, cfg)
    ratings = [SkillRating(s, float(mu[index[s]]), float(sigma[index[s]])) for s in systems]
    ratings.sort(key=lambda r: (-r.mu, r.system))
    return ratings


def _bootstrap_ranks(outcomes: dict[tuple[str, str], np.ndarray], systems: list[str],
                     n_bootstrap: int, rng_seed: int,
                     cfg: TrueSkillConfig) -> np.ndarray:
    """Rank matrix [n_bootstrap, n_systems]; each replicate resamples every
    pair's annotation set with replacement and reruns the rating chain with
    its own RNG stream, so results do not depend on scheduling."""
    index = {s: i for i, s in enumerate(systems)}
    pair_blocks = [(index[a], index[b], arr) for (a, b), arr in outcomes.items()]
    n_total = sum(len(arr) for _, _, arr in pair_blocks)

    first = np.empty((n_total, n_bootstrap), dtype=np.int16)
    second = np.empty((n_total, n_bootstrap), dtype=np.int16)
    outcome = np.empty((n_total, n_bootstrap), dtype=np.int8)
    base_first = np.concatenate([np.full(len(arr), ia, dtype=np.int16) for ia, _, arr in pair_blocks])
    base_second = np.concatenate([np.full(len(arr), ib, dtype=np.int16) for _, ib, arr in pair_blocks])

    for b in range(n_bootstrap):
        rng = np.random.default_rng([rng_seed, b])
        resampled = [arr[rng.integers(0, len(arr), len(arr))] for _, _, arr in pair_blocks]
        col = np.concatenate(resampled)
        order = rng.permutation(n_total)
        first[:, b] = base_first[order]
        second[:, b] = base_second[order]
        outcome[:, b] = col[order]

    mu = run_rating_chains_vectorized(len(systems), first, second, outcome, cfg)
    order = np.argsort(-mu, axis=1, kind="stable")
    ranks = np.empty_like(order)
    rows = np.arange(mu.shape[0])[:, None]
    ranks[rows, order] = np.arange(1, len(systems) + 1)
    return ranks


def _merge_overlapping(systems: list[str], rank_range: Mapping[str, tuple[int, int]],
                       median_rank: Mapping[str, float]) -> tuple[tuple[str, ...], ...]:
    remaining = set(systems)
    clusters: list[set[str]] = []
    while remaining:
        seed_sys = remaining.pop()
        cluster = {seed_sys}
        changed = True
        while changed:
            changed = False
            for s in list(remaining):
                lo, hi = rank_range[s]
                if any(lo <= rank_range[c][1] and rank_range[c][0] <= hi for c in cluster):
                    cluster.add(s)
                    remaining.remove(s)
                    changed = True
        clusters.append(cluster)
    ordered = sorted(clusters, key=lambda c: float(np.mean([median_rank[s] for s in c])))
    return tuple(tuple(sorted(c, key=lambda s: (median_rank[s], s))) for c in ordered)


def bootstrap_ranking(records: Sequence[AnnotationRecord], plan: Plan,
                      n_bootstrap: int = 1000, rng_seed: int = 0,
                      cfg: TrueSkillConfig = TrueSkillConfig()) -> RankingReport:
    """Full ranking report: pair stats, ratings, bootstrap rank ranges, clusters."""
    outcomes = pair_outcomes(records, plan)
    if not outcomes:
        raise StbError("no bot-bot annotations to rank")
    systems = sorted({s for key in outcomes for s in key})
    if len(systems) < 2:
        raise StbError("ranking needs at least two systems")
    for (a, b), arr in outcomes.items():
        if not np.any(arr != 0):
            raise UndefinedRateError(f"no decisive annotations between {a} and {b}")

    pair_stats: dict[tuple[str, str], PairStat] = {}
    wins_total = {s: 0 for s in systems}
    decisive_total = {s: 0 for s in systems}
    for (a, b), arr in outcomes.items():
        t = WinTally(a, b, int(np.sum(arr == 1)), int(np.sum(arr == -1)), int(np.sum(arr == 0)))
        stat, p = chi_square(t)
        pair_stats[(a, b)] = PairStat(t, win_rate(t), stat, p)
        wins_total[a] += t.wins_a
        wins_total[b] += t.wins_b
        decisive_total[a] += t.decisive
        decisive_total[b] += t.decisive
    aggregate_wr = {s: wins_total[s] / decisive_total[s] for s in systems}

    ratings = fit_trueskill(records, plan, rng_seed=rng_seed, cfg=cfg)

    ranks = _bootstrap_ranks(outcomes, systems, n_bootstrap, rng_seed, cfg)
    rank_range: dict[str, tuple[int, int]] = {}
    median_rank: dict[str, float] = {}
    for i, s in enumerate(systems):
        col = ranks[:, i]
        lo = int(np.quantile(col, 0.025, method="inverted_cdf"))
        hi = int(np.quantile(col, 0.975, method="inverted_cdf"))
        rank_range[s] = (lo, hi)
        median_rank[s] = float(np.median(col))

    clusters = _merge_overlapping(systems, rank_range, median_rank)
    return RankingReport(
        systems=tuple(r.system for r in ratings),
        ratings=tuple(ratings),
        pair_stats=pair_stats,
        win_rate=aggregate_wr,
        rank_range=rank_range,
        median_rank=median_rank,
        clusters=clusters,
        n_bootstrap=n_bootstrap,
        rng_seed=rng_seed,
    )
