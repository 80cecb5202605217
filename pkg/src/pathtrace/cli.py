"""Command-line entry point: ``pathtrace <stage> [options]``."""

from __future__ import annotations

import functools
import json
import logging
import sys
from pathlib import Path

import click

from . import pipeline
from .errors import PathtraceError
from .pipeline import PipelineConfig


def _common(fn):
    opts = [
        click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
                     help="JSON pipeline config."),
        click.option("--seed", type=int, help="Seed for every stochastic stage."),
        click.option("--theta", type=float, help="Minimum combined score for a path terminal."),
        click.option("--beta", type=float, help="Intermediate-node factor on theta."),
        click.option("--alpha", type=float, help="Structural weight in the combined score."),
        click.option("--gamma", type=float, help="Noise weight in path significance."),
        click.option("--target", help="Target node (default PROFIT_MARGIN)."),
        click.option("--out-dir", type=click.Path(file_okay=False, path_type=Path),
                     help="Directory for all artifacts."),
    ]
    for opt in reversed(opts):
        fn = opt(fn)

    @functools.wraps(fn)
    def wrapper(config_path, seed, theta, beta, alpha, gamma, target, out_dir, **kw):
        try:
            base = PipelineConfig.load(config_path) if config_path else PipelineConfig()
            cfg = base.resolved(seed=seed, theta=theta, beta=beta, alpha=alpha, gamma=gamma,
                                target=target, out_dir=out_dir)
            return fn(cfg, **kw)
        except PathtraceError as exc:
            click.echo(json.dumps(exc.to_dict()), err=True)
            sys.exit(2)
        except (OSError, ValueError, KeyError) as exc:
            click.echo(json.dumps({"error": type(exc).__name__, "message": str(exc)}), err=True)
            sys.exit(2)

    return wrapper


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def main(verbose):
    """Causal root-cause pathway analysis for a retail PROFIT_MARGIN experiment."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")


@main.command()
@_common
def generate(cfg):
    """Write seeded synthetic transactions."""
    frame = pipeline.stage_generate(cfg)
    click.echo(f"{len(frame)} rows -> {cfg.path_of('data')}")


@main.command("inject")
@_common
def inject_cmd(cfg):
    """Apply the anomaly schedule to the generated transactions."""
    frame = pipeline.stage_inject(cfg)
    for item in frame.attrs["injection"]["applied"]:
        click.echo(f"{item['date']} {item['kind']} {item['scope']}: {item['rows']} rows")
    for warning in frame.attrs["injection"]["warnings"]:
        click.echo(f"warning: {warning}", err=True)


@main.command("detect")
@_common
def detect_cmd(cfg):
    """Flag anomalous dates of the daily target series."""
    result = pipeline.stage_detect(cfg)
    click.echo(json.dumps(result.to_json()["dates"]))


@main.command()
@_common
def fit(cfg):
    """Fit the structural causal model and cache it on disk."""
    scm = pipeline.stage_fit(cfg)
    for node, model in scm.metadata["models"].items():
        click.echo(f"{node}: {model}")


@main.command("analyze")
@_common
@click.option("--date", "dates", multiple=True, help="Analyse this date (repeatable); default: detected dates.")
def analyze_cmd(cfg, dates):
    """Trace and rank causal pathways for each anomalous date."""
    if dates:
        cfg.dates = list(dates)
    doc = pipeline.stage_analyze(cfg)
    for rep in doc["reports"]:
        top = " -> ".join(rep["paths"][0]["nodes"]) if rep["paths"] else "(none)"
        click.echo(f"{rep['date']}: {top}")


@main.command()
@_common
def report(cfg):
    """Render the analysis JSON as text tables."""
    click.echo(pipeline.stage_report(cfg), nl=False)


@main.command("run-all")
@_common
def run_all(cfg):
    """Run every stage in order."""
    pipeline.run_all(cfg)
    click.echo(pipeline.stage_report(cfg), nl=False)


if __name__ == "__main__":
    main()
