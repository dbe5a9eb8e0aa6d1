"""Command-line surface: run, validate, analyze, resume.

Exit codes: 0 ok, 2 configuration or guard error, 3 I/O error.
"""

from __future__ import annotations

import os
import sys
from pathlib import Path

import click

from .config import ConfigError, load_config
from .runner import RunError, analyze_runs, resume_run, run_simulation, validate_config

EXIT_CONFIG = 2
EXIT_IO = 3


def _threads() -> int:
    raw = os.environ.get("MEE_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"MEE_THREADS must be an integer, got {raw!r}")
    if n < 1:
        raise ConfigError("MEE_THREADS must be >= 1")
    return n


@click.group()
def main() -> None:
    """Micro-ecology engine."""


@main.command("run")
@click.option("--config", "-c", "config_path", type=click.Path(), default=None, help="Config file (defaults to the built-in configuration).")
@click.option("--out", "-o", "out_dir", type=click.Path(), required=True, help="Run directory to create.")
@click.option("--ticks", "-t", type=int, required=True)
@click.option("--seed", type=int, default=None, help="Override the master seed.")
def cmd_run(config_path: str | None, out_dir: str, ticks: int, seed: int | None) -> None:
    """Simulate the ecology and write a run directory."""
    try:
        _threads()
        cfg = load_config(config_path, seed_override=seed)
        out = run_simulation(cfg, out_dir, ticks)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except RunError as exc:
        message = str(exc)
        click.echo(message, err=True)
        sys.exit(EXIT_CONFIG if "GUARD-FAIL" in message or "validation" in message else EXIT_IO)
    except OSError as exc:
        click.echo(f"i/o error: {exc}", err=True)
        sys.exit(EXIT_IO)
    click.echo(str(out))


@main.command("validate")
@click.option("--config", "-c", "config_path", type=click.Path(), default=None)
def cmd_validate(config_path: str | None) -> None:
    """Check the trivial-collapse guard against the naive-predictor baselines."""
    try:
        cfg = load_config(config_path)
        report, baselines = validate_config(cfg)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except OSError as exc:
        click.echo(f"i/o error: {exc}", err=True)
        sys.exit(EXIT_IO)
    for kind, b in sorted(baselines.items(), key=lambda kv: kv[0].value):
        click.echo(f"baseline [{kind.value}]: {b:.6g}")
    click.echo(str(report))
    if not report.ok:
        sys.exit(EXIT_CONFIG)
    click.echo(f"ok (worst margin {report.worst_margin:.6g})")


@main.command("analyze")
@click.argument("run_dirs", nargs=-1, type=click.Path(exists=False))
@click.option("--out", "-o", "out_dir", type=click.Path(), default=None, help="Analysis output directory (default: <first run>/analysis).")
def cmd_analyze(run_dirs: tuple[str, ...], out_dir: str | None) -> None:
    """Measure the ecology predictions over one or more completed runs."""
    if not run_dirs:
        click.echo("analyze needs at least one run directory", err=True)
        sys.exit(EXIT_CONFIG)
    if out_dir is None:
        out_dir = str(Path(run_dirs[0]) / "analysis")
    try:
        report = analyze_runs(list(run_dirs), out_dir)
    except RunError as exc:
        click.echo(str(exc), err=True)
        sys.exit(EXIT_IO)
    except OSError as exc:
        click.echo(f"i/o error: {exc}", err=True)
        sys.exit(EXIT_IO)
    click.echo(str(Path(out_dir) / "report.json"))
    p2 = report["prediction_2_noise_avoidance"]
    click.echo(f"noise fraction declined in {p2['declined_runs']}/{p2['eligible_runs']} runs")


@main.command("resume")
@click.argument("run_dir", type=click.Path())
@click.option("--out", "-o", "out_dir", type=click.Path(), required=True)
@click.option("--ticks", "-t", type=int, required=True)
@click.option("--from-tick", type=int, default=None, help="Resume from this snapshot tick (default: latest).")
def cmd_resume(run_dir: str, out_dir: str, ticks: int, from_tick: int | None) -> None:
    """Continue a run from a snapshot into a new run directory."""
    try:
        _threads()
        out = resume_run(run_dir, out_dir, ticks, snapshot_tick=from_tick)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except RunError as exc:
        click.echo(str(exc), err=True)
        sys.exit(EXIT_IO)
    except OSError as exc:
        click.echo(f"i/o error: {exc}", err=True)
        sys.exit(EXIT_IO)
    click.echo(str(out))


if __name__ == "__main__":
    main()
