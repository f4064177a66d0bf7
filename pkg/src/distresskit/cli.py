"""Command-line entry points for the pipeline.

Every subcommand takes --config (YAML, documented in the README) plus
optional --seed / --backend-url / --out overrides.  Failures print one
machine-readable JSON object to stderr.  Exit codes: 0 success, 1 some
evaluation cells failed, 2 fatal error.
"""

from __future__ import annotations

import json
import logging
import sys
from functools import wraps
from pathlib import Path

import click

from . import runner
from .errors import DistresskitError

EXIT_OK = 0
EXIT_CELL_FAILURES = 1
EXIT_FATAL = 2


def _fail(exc: Exception) -> None:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    print(json.dumps(payload), file=sys.stderr)
    sys.exit(EXIT_FATAL)


def _with_config(fn):
    @click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
    @click.option("--seed", type=int, default=None, help="Override the global RNG seed.")
    @click.option("--backend-url", default=None, help="Override the scoring backend URL.")
    @click.option("--out", default=None, help="Override the output directory.")
    @wraps(fn)
    def wrapper(config_path, seed, backend_url, out, **kwargs):
        overrides = {}
        if seed is not None:
            overrides["rng_seed"] = seed
        if backend_url is not None:
            overrides["backend"] = backend_url
        if out is not None:
            overrides["out_dir"] = out
        try:
            cfg = runner.load_config(config_path, overrides)
            return fn(cfg, **kwargs)
        except DistresskitError as exc:
            _fail(exc)
        except (KeyError, ValueError, OSError) as exc:
            _fail(exc)

    return wrapper


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log stage progress.")
def main(verbose):
    """Corporate-distress text analytics pipeline."""
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )


def _single_stage(cfg, stage):
    # Single-stage commands still need upstream outputs present; the staged
    # cache keys make reruns cheap, so requesting prior stages is implicit
    # only for `run`.
    reports, state = runner.run(cfg, stages=[stage])
    return reports, state


@main.command()
@_with_config
def synth(cfg):
    """Generate the synthetic corpus, financials, and base lexicon."""
    runner.stage_synth(cfg)
    click.echo(f"synthetic corpus written next to {cfg.corpus_index}")


@main.command()
@_with_config
def extract(cfg):
    """Extract and clean MD&A sections into docs.jsonl."""
    state = runner.RunState(cfg)
    out = runner.stage_extract(state)
    docs = sum(1 for line in open(out, encoding="utf-8") if line.strip())
    click.echo(f"{docs} documents -> {out}")


@main.command()
@_with_config
def tone(cfg):
    """Compute dictionary tone for every document."""
    state = runner.RunState(cfg)
    runner.stage_extract(state)
    out = runner.stage_tone(state)
    click.echo(f"tones -> {out}")


@main.command()
@_with_config
def score(cfg):
    """Score documents with the configured backend."""
    state = runner.RunState(cfg)
    runner.stage_extract(state)
    outputs = runner.stage_score(state)
    for out in outputs:
        click.echo(f"sentiments -> {out}")


@main.command()
@_with_config
def adapt(cfg):
    """Run the self-learning round and score with the adapted model."""
    state = runner.RunState(cfg)
    runner.stage_extract(state)
    out = runner.stage_adapt(state)
    click.echo(f"adapted sentiments -> {out}")
    if state.adaptation_summary:
        click.echo(json.dumps(state.adaptation_summary))


@main.command()
@_with_config
def features(cfg):
    """Assemble observation CSVs for the configured variable sets."""
    reports, state = runner.run(cfg, stages=["extract", "tone", "score", "adapt", "features"])
    for vs in cfg.variable_sets:
        click.echo(f"features -> {state.path('features_' + vs.replace('+', '_') + '.csv')}")


@main.command()
@_with_config
def evaluate(cfg):
    """Run the full experiment grid and write reports."""
    reports, state = runner.run(cfg)
    click.echo(f"report -> {state.path('report.csv')}")
    if state.cell_errors:
        for err in state.cell_errors:
            print(json.dumps(err), file=sys.stderr)
        sys.exit(EXIT_CELL_FAILURES)


@main.command()
@click.option("--stage", "stages", multiple=True, type=click.Choice(runner.STAGES))
@_with_config
def run(cfg, stages):
    """Run the pipeline (optionally only selected stages)."""
    reports, state = runner.run(cfg, stages=list(stages) or None)
    click.echo(f"outputs under {cfg.out_dir}")
    if state.cell_errors:
        for err in state.cell_errors:
            print(json.dumps(err), file=sys.stderr)
        sys.exit(EXIT_CELL_FAILURES)


@main.command()
@_with_config
def report(cfg):
    """Re-render report.csv and chart.svg from report.json."""
    from .evaluation import MetricReport

    state = runner.RunState(cfg)
    payload = json.loads(state.path("report.json").read_text("utf-8"))
    reports = [
        MetricReport(
            variable_set=cell["variable_set"],
            classifier=cell["classifier"],
            a1=tuple(cell["a1"]),
            a2=tuple(cell["a2"]),
            r2=tuple(cell["r2"]),
            r2_rescaled=tuple(cell.get("r2_rescaled", ())),
        )
        for cell in payload["cells"]
    ]
    runner.write_report_csv(reports, state.path("report.csv"))
    runner.render_chart(reports, state.path("chart.svg"))
    click.echo(f"report -> {state.path('report.csv')}")
    click.echo(f"chart -> {state.path('chart.svg')}")


if __name__ == "__main__":
    main()
