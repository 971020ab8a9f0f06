"""Command-line entry points for the whole pipeline."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import arena, batching, corpus, report
from .analyses import (annotator_correctness, label_agreement, min_stable_n,
                       stability_curve)
from .annotation import import_annotations
from .errors import StbError


class _Group(click.Group):
    """Surface domain errors as clean CLI messages instead of tracebacks."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except (StbError, OSError) as exc:
            raise click.ClickException(str(exc)) from exc


@click.group(cls=_Group)
def main() -> None:
    """Tournament evaluation for conversational dialogue systems."""


def _load_endpoints(path: str, seed_corpus: corpus.Corpus) -> list[arena.BotEndpoint]:
    spec = json.loads(Path(path).read_text(encoding="utf-8"))
    endpoints = []
    unigram_model = None
    for entry in spec:
        if entry.get("url"):
            endpoints.append(arena.BotEndpoint(system_name=entry["system_name"], url=entry["url"],
                                               timeout=float(entry.get("timeout", 30.0))))
        elif entry.get("builtin") == "canned":
            endpoints.append(arena.BotEndpoint(system_name=entry["system_name"], builtin="canned",
                                               replies=tuple(entry["replies"])))
        elif entry.get("builtin") == "unigram":
            if unigram_model is None:
                unigram_model = arena.UnigramModel.train(seed_corpus)
            endpoints.append(arena.BotEndpoint(system_name=entry["system_name"], builtin="unigram",
                                               model=unigram_model))
        elif entry.get("builtin") == "echo":
            endpoints.append(arena.BotEndpoint(system_name=entry["system_name"], builtin="echo"))
        else:
            raise StbError(f"bot entry needs url or builtin: {entry}")
    return endpoints


@main.command()
@click.option("--bots", required=True, help="JSON list of bot endpoints")
@click.option("--seeds", required=True, help="human test-set conversations (JSONL)")
@click.option("--pairs", default="all", show_default=True)
@click.option("--n", default=45, show_default=True, help="conversations per pair")
@click.option("--target-exchanges", default=5, show_default=True)
@click.option("--segments", default="2,3,5", show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True)
def sample(bots, seeds, pairs, n, target_exchanges, segments, seed, out):
    """Sample bot-bot conversations for every pair."""
    ks = [int(k) for k in segments.split(",")]
    seed_corpus = corpus.load_corpus(seeds, ks)
    endpoints = _load_endpoints(bots, seed_corpus)
    if pairs != "all":
        wanted = set(pairs.split(","))
        endpoints = [e for e in endpoints if e.system_name in wanted]
    config = arena.SamplingConfig(seed_corpus=seed_corpus, conversations_per_pair=n,
                                  target_exchanges=target_exchanges, rng_seed=seed)
    conversations = arena.sample_tournament(endpoints, config)
    sampled = corpus.Corpus(domain=seed_corpus.domain, conversations=tuple(conversations),
                            segment_lengths=tuple(ks))
    corpus.save_corpus(sampled, out)
    click.echo(f"wrote {len(conversations)} conversations to {out}")


@main.command("plan")
@click.option("--bot-convs", required=True)
@click.option("--human-convs", default=None)
@click.option("--segments", default="2,3,5", show_default=True)
@click.option("--mix", default=0.2, show_default=True, help="human share of items")
@click.option("--batch-size", default=20, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True)
def plan_cmd(bot_convs, human_convs, segments, mix, batch_size, seed, out):
    """Build segment items and constraint-respecting batches."""
    ks = [int(k) for k in segments.split(",")]
    bot_corpus = corpus.load_corpus(bot_convs, ks)
    human_corpus = corpus.load_corpus(human_convs, ks) if human_convs else None
    items = batching.build_items(bot_corpus, human_corpus, human_mix=mix, rng_seed=seed)
    batches = batching.assemble_batches(items, batch_size=batch_size, rng_seed=seed)
    plan = batching.Plan(
        config=batching.PlanConfig(batch_size=batch_size, human_mix=mix, rng_seed=seed,
                                   segment_lengths=tuple(ks)),
        batches=tuple(batches),
    )
    batching.save_plan(plan, out)
    click.echo(f"wrote {len(items)} items in {len(batches)} batches to {out}")


@main.command()
@click.option("--plan", "plan_path", required=True)
@click.option("--store", default="./data", show_default=True)
@click.option("--port", default=8080, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--ui", "ui_dir", default=None,
              help="directory with the built annotation UI (index.html + dist/)")
def serve(plan_path, store, port, host, ui_dir):
    """Run the annotation service."""
    import uvicorn

    from .service import create_app

    plan = batching.load_plan(plan_path)
    app = create_app(plan, store, ui_dir=ui_dir)
    click.echo(f"admin token in {Path(store) / 'admin_token.txt'}")
    uvicorn.run(app, host=host, port=port, log_level="info")


def _load_inputs(annotations, plan_path):
    plan = batching.load_plan(plan_path)
    records, rejected = import_annotations(annotations, plan)
    for reason in rejected:
        click.echo(f"rejected: {reason}", err=True)
    if not records:
        raise StbError("no valid annotation records")
    return records, plan


@main.command()
@click.option("--annotations", required=True)
@click.option("--plan", "plan_path", required=True)
@click.option("--bootstrap", default=1000, show_default=True)
@click.option("--seed", default=7, show_default=True)
@click.option("--out", required=True)
def rank(annotations, plan_path, bootstrap, seed, out):
    """Win rates, chi-square, skill ratings, bootstrap rank ranges."""
    records, plan = _load_inputs(annotations, plan_path)
    from .ranking import bootstrap_ranking

    result = bootstrap_ranking(records, plan, n_bootstrap=bootstrap, rng_seed=seed)
    Path(out).write_text(json.dumps(result.to_dict(), indent=1), encoding="utf-8")
    click.echo(report.ranking_table(result))


@main.command()
@click.option("--annotations", required=True)
@click.option("--plan", "plan_path", required=True)
@click.option("--permutations", default=2000, show_default=True)
@click.option("--seed", default=7, show_default=True)
@click.option("--out", required=True)
@click.option("--curves", default=None, help="optional CSV of survival points")
def survival(annotations, plan_path, permutations, seed, out, curves):
    """Survival curves, pairwise log-rank tests, Cox feature effects."""
    records, plan = _load_inputs(annotations, plan_path)
    result = report.build_survival_report(records, plan, permutations=permutations, rng_seed=seed)
    Path(out).write_text(json.dumps(result, indent=1), encoding="utf-8")
    if curves:
        Path(curves).write_text(report.curves_csv(result), encoding="utf-8")
    click.echo("survival ranking: " + " > ".join(result["ranking"]))
    click.echo(report.feature_table(result))


@main.command()
@click.option("--annotations", required=True)
@click.option("--plan", "plan_path", required=True)
@click.option("--n", "n_range", default="3:45", show_default=True, help="min:max subsample size")
@click.option("--reps", default=1000, show_default=True)
@click.option("--seed", default=7, show_default=True)
@click.option("--threshold", default=0.95, show_default=True)
@click.option("--out", required=True)
def stability(annotations, plan_path, n_range, reps, seed, threshold, out):
    """Ranking stability under conversation subsampling."""
    records, plan = _load_inputs(annotations, plan_path)
    lo, hi = (int(x) for x in n_range.split(":"))
    curve = stability_curve(records, plan, range(lo, hi + 1), reps=reps, rng_seed=seed)
    lines = ["n,proportion"] + [f"{n},{p:.4f}" for n, p in zip(curve.ns, curve.proportions)]
    Path(out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    stable = min_stable_n(curve, threshold)
    click.echo(f"min stable n at {threshold:.0%}: {stable if stable is not None else 'not reached'}")


@main.command()
@click.option("--annotations", required=True)
@click.option("--plan", "plan_path", required=True)
@click.option("--out", default=None)
def agreement(annotations, plan_path, out):
    """Per-label annotator agreement."""
    records, plan = _load_inputs(annotations, plan_path)
    table = label_agreement(records, plan)
    payload = json.dumps(table.to_dict(), indent=1)
    if out:
        Path(out).write_text(payload, encoding="utf-8")
    click.echo(payload)


@main.command()
@click.option("--annotations", required=True)
@click.option("--plan", "plan_path", required=True)
@click.option("--filter-below", default=0.75, show_default=True)
@click.option("--out", default=None)
def annotators(annotations, plan_path, filter_below, out):
    """Annotator correctness scores and filtering."""
    records, plan = _load_inputs(annotations, plan_path)
    result = annotator_correctness(records, plan, threshold=filter_below)
    payload = json.dumps(result.to_dict(), indent=1)
    if out:
        Path(out).write_text(payload, encoding="utf-8")
    click.echo(payload)


@main.command("report")
@click.option("--annotations", required=True)
@click.option("--plan", "plan_path", required=True)
@click.option("--bootstrap", default=1000, show_default=True)
@click.option("--permutations", default=2000, show_default=True)
@click.option("--seed", default=7, show_default=True)
@click.option("--out", required=True, help="JSON output path")
@click.option("--markdown", "md_out", default=None, help="optional Markdown path")
def report_cmd(annotations, plan_path, bootstrap, permutations, seed, out, md_out):
    """Bundle every table into one report."""
    records, plan = _load_inputs(annotations, plan_path)
    bundle = report.bundle_report(records, plan, n_bootstrap=bootstrap,
                                  permutations=permutations, rng_seed=seed)
    Path(out).write_text(json.dumps(bundle.data, indent=1), encoding="utf-8")
    if md_out:
        Path(md_out).write_text(bundle.markdown, encoding="utf-8")
    click.echo(f"report written to {out}")


if __name__ == "__main__":
    sys.exit(main())
