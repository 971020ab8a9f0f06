"""Machine-readable and human-readable reports over a finished annotation run."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .analyses import (annotator_correctness, label_agreement, segment_stats,
                       timing_stats)
from .annotation import FEATURES, AnnotationRecord
from .batching import Plan
from .errors import StbError, UndefinedRateError, UnidentifiableCovariateError
from .ranking import RankingReport, bootstrap_ranking
from .survival import (SurvivalObservation, TurnbullEstimate, cox_fit,
                       encode_observations, feature_win_rate,
                       pairwise_tests_corrected, turnbull_fit)


def observations_by_system(records: Sequence[AnnotationRecord], plan: Plan
                           ) -> dict[str, list[SurvivalObservation]]:
    grouped: dict[str, list[SurvivalObservation]] = {}
    for obs in encode_observations(records, plan):
        grouped.setdefault(obs.system, []).append(obs)
    return grouped


def survival_ranking(estimates: Mapping[str, TurnbullEstimate]) -> list[str]:
    """Systems ordered by survival at the largest inspection time common to all."""
    common = set.intersection(*(set(e.times) for e in estimates.values()))
    if not common:
        raise StbError("no inspection time is common to all systems")
    t = max(common)
    return sorted(estimates, key=lambda s: (-estimates[s].survival_at(t), s))


def build_survival_report(records: Sequence[AnnotationRecord], plan: Plan,
                          permutations: int = 2000, rng_seed: int = 0) -> dict:
    grouped = observations_by_system(records, plan)
    if not grouped:
        raise StbError("no bot-bot annotations")

    curves = {}
    estimates = {}
    for system, obs in sorted(grouped.items()):
        est = turnbull_fit(obs)
        estimates[system] = est
        curves[system] = [{"time": t, "survival": s} for t, s in zip(est.times, est.survival)]

    tests = {}
    if len(grouped) >= 2:
        for (a, b), res in pairwise_tests_corrected(
                grouped, permutations=permutations, rng_seed=rng_seed).items():
            tests[f"{a} vs {b}"] = {
                "statistic": res.statistic,
                "p_raw": res.p_raw,
                "p_adjusted": res.p_adjusted,
                "significant": res.significant,
            }

    cox = {}
    features = {}
    for system, obs in sorted(grouped.items()):
        row: dict[str, object] = {}
        for feature in FEATURES:
            try:
                row[feature.value] = feature_win_rate(records, plan, system, feature.value)
            except UndefinedRateError:
                row[feature.value] = None
        try:
            row["ssa"] = feature_win_rate(records, plan, system, None, mode="ssa")
        except UndefinedRateError:
            row["ssa"] = None
        features[system] = row
        try:
            cox[system] = cox_fit(obs).to_dict()
        except (StbError, UnidentifiableCovariateError) as exc:
            cox[system] = {"error": str(exc)}

    return {
        "curves": curves,
        "ranking": survival_ranking(estimates),
        "pairwise_tests": tests,
        "cox": cox,
        "feature_win_rates": features,
    }


def curves_csv(survival_report: dict) -> str:
    lines = ["system,time,survival"]
    for system, points in sorted(survival_report["curves"].items()):
        for pt in points:
            lines.append(f"{system},{pt['time']:g},{pt['survival']:.6f}")
    return "\n".join(lines) + "\n"


def ranking_table(report: RankingReport) -> str:
    """Pair matrix with significance stars, aggregate WR and rank ranges."""
    systems = list(report.systems)
    width = max(len(s) for s in systems) + 1
    header = " " * width + "".join(f"{s:>{width}}" for s in systems)
    header += f"{'WR':>8}{'Range':>10}"
    lines = [header]
    for a in systems:
        cells = []
        for b in systems:
            if a == b:
                cells.append(f"{'-':>{width}}")
                continue
            key = (a, b) if (a, b) in report.pair_stats else (b, a)
            stat = report.pair_stats.get(key)
            if stat is None:
                cells.append(f"{'.':>{width}}")
                continue
            rate = stat.win_rate_a if key[0] == a else 1.0 - stat.win_rate_a
            star = "*" if stat.p_value < 0.05 else " "
            cells.append(f"{rate:>{width - 1}.2f}{star}")
        lo, hi = report.rank_range[a]
        lines.append(f"{a:<{width}}" + "".join(cells) + f"{report.win_rate[a]:>8.2f}" + f"{f'({lo},{hi})':>10}")
    lines.append("")
    lines.append("clusters: " + " > ".join("{" + ", ".join(c) + "}" for c in report.clusters))
    lines.append("* pairwise chi-square p < 0.05")
    return "\n".join(lines)


def feature_table(survival_report: dict) -> str:
    """Per-system feature win rates; '*' marks a significant Cox effect."""
    systems = sorted(survival_report["feature_win_rates"])
    names = [f.value for f in FEATURES]
    width = max([len(s) for s in systems] + [12]) + 1
    lines = [" " * width + "".join(f"{n:>14}" for n in names) + f"{'ssa':>14}"]
    for system in systems:
        row = survival_report["feature_win_rates"][system]
        cox = survival_report["cox"].get(system, {})
        significant = cox.get("significant", {}) if "error" not in cox else {}
        cells = []
        for name in names:
            rate = row.get(name)
            mark = "*" if significant.get(name) else " "
            cells.append(f"{'--':>13} " if rate is None else f"{rate:>13.2f}{mark}")
        ssa = row.get("ssa")
        cells.append(f"{'--':>14}" if ssa is None else f"{ssa:>14.2f}")
        lines.append(f"{system:<{width}}" + "".join(cells))
    lines.append("* significant Cox covariate (Wald p < 0.05)")
    return "\n".join(lines)


@dataclass(frozen=True)
class Bundle:
    data: dict
    markdown: str


def bundle_report(records: Sequence[AnnotationRecord], plan: Plan,
                  n_bootstrap: int = 1000, permutations: int = 2000,
                  rng_seed: int = 0) -> Bundle:
    """Everything in one place: ranking, survival, agreement, annotators,
    segment-length stats and timing."""
    ranking = bootstrap_ranking(records, plan, n_bootstrap=n_bootstrap, rng_seed=rng_seed)
    surv = build_survival_report(records, plan, permutations=permutations, rng_seed=rng_seed)
    agreement = label_agreement(records, plan)
    correctness = annotator_correctness(records, plan)
    segments = segment_stats(records, plan)
    timing = timing_stats(records, plan)

    data = {
        "ranking": ranking.to_dict(),
        "survival": surv,
        "agreement": agreement.to_dict(),
        "annotators": correctness.to_dict(),
        "segments": segments.to_dict(),
        "timing": {d: {"mean_seconds": t.mean_seconds, "median_seconds": t.median_seconds,
                       "n": t.n} for d, t in timing.items()},
    }

    md = ["# Tournament report", ""]
    md += ["## Win rates and ranking", "", "```", ranking_table(ranking), "```", ""]
    md += ["## Survival", "",
           "Survival ranking: " + " > ".join(surv["ranking"]), "", "```",
           feature_table(surv), "```", ""]
    md += ["## Label agreement", ""]
    md.append("| system | bot | unsure | human | identical |")
    md.append("|---|---|---|---|---|")
    for system, row in sorted(agreement.per_label.items()):
        cells = [_fmt(row.get("bot")), _fmt(row.get("unsure")), _fmt(row.get("human")),
                 _fmt(agreement.identical_rate.get(system))]
        md.append(f"| {system} | " + " | ".join(cells) + " |")
    md.append("")
    md += ["## Annotators", "",
           f"retained {len(correctness.retained)}, filtered {len(correctness.filtered)} "
           f"(threshold {correctness.threshold})", ""]
    md += ["## Timing", ""]
    md.append("| domain | mean s | median s | n |")
    md.append("|---|---|---|---|")
    for domain, t in sorted(timing.items()):
        md.append(f"| {domain} | {t.mean_seconds:.1f} | {t.median_seconds:.1f} | {t.n} |")
    md.append("")
    return Bundle(data=data, markdown="\n".join(md))


def _fmt(x) -> str:
    return "--" if x is None else f"{x:.2f}"
