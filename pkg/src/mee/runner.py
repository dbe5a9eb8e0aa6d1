"""Run orchestration and persistence.

A run directory contains an immutable manifest written before tick 0, a
per-tick aggregate timeseries, a gzipped per-unit ledger, a JSON-lines
event log, periodic canonical-JSON snapshots, state-hash checkpoints, and
a result summary written at the end. Analysis is a pure function of these
files.
"""

from __future__ import annotations

import csv
import gzip
import json
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import AppConfig, ConfigError, make_stream_set, make_weather, make_world
from .metrics import (
    assign_trophic_levels,
    build_profiles,
    complexity_series,
    efficiency_series,
    mann_kendall,
    mean_specialization_entropy,
    path_divergence,
)
from .genome import Genome
from .physics import GuardReport, run_baseline_oracle, validate_params
from .serialize import canonical_json
from .streams import StreamKind
from .world import UnitTickRecord, World

SNAPSHOT_FORMAT = "mee-snapshot"
SNAPSHOT_VERSION = 1

TIMESERIES_COLUMNS = [
    "tick",
    "population",
    "births",
    "deaths",
    "mean_energy",
    "err_numeric",
    "err_text",
    "err_noise",
    "err_temporal",
    "err_emission",
    "noise_fraction",
    "total_gain",
    "total_compute",
    "total_maintenance",
]

LEDGER_COLUMNS = [
    "tick",
    "unit_id",
    "e_before",
    "gain",
    "compute_cost",
    "maintenance",
    "e_after",
    "surplus",
    "v_in",
    "v_volume",
    "v_repr",
    "error",
    "corrupt",
    "sources",
    "volumes",
]


class RunError(RuntimeError):
    """A run could not proceed (guard violation, bad directory, ...)."""


def _encode_pairs(pairs) -> str:
    return "|".join(f"{name}={value!r}" for name, value in pairs)


def _decode_pairs(text: str) -> tuple[tuple[str, float], ...]:
    if not text:
        return ()
    out = []
    for item in text.split("|"):
        name, value = item.rsplit("=", 1)
        out.append((name, float(value)))
    return tuple(out)


def compute_baselines(cfg: AppConfig) -> dict:
    streams = make_stream_set(cfg)
    return run_baseline_oracle(streams, cfg.run.baseline_ticks, cfg.world.master_seed)


def validate_config(cfg: AppConfig) -> tuple[GuardReport, dict]:
    """Run the naive-predictor oracle and check the trivial-collapse guard
    over the full sensory width (streams plus emission channels)."""
    baselines = compute_baselines(cfg)
    streams = make_stream_set(cfg)
    sensory_width = streams.width + cfg.world.emission_slots
    report = validate_params(cfg.physics, sensory_width, baselines)
    return report, baselines


def snapshot_dict(world: World, config_hash: str) -> dict:
    return {
        "format": SNAPSHOT_FORMAT,
        "version": SNAPSHOT_VERSION,
        "config_hash": config_hash,
        "state": world.state_dict(),
    }


def write_snapshot(path: Path, snap: dict) -> None:
    data = canonical_json(snap).encode("utf-8")
    # mtime pinned to zero so identical state produces identical bytes.
    with open(path, "wb") as raw:
        with gzip.GzipFile(filename="", mode="wb", fileobj=raw, mtime=0) as fh:
            fh.write(data)


def read_snapshot(path: Path) -> dict:
    with gzip.open(path, "rb") as fh:
        return json.loads(fh.read().decode("utf-8"))


def world_from_snapshot(cfg: AppConfig, snap: dict) -> World:
    if snap.get("format") != SNAPSHOT_FORMAT:
        raise RunError(f"not a snapshot file (format={snap.get('format')!r})")
    if snap.get("config_hash") != cfg.config_hash():
        raise RunError("snapshot was produced under a different configuration")
    world = World(cfg.world, cfg.physics, cfg.rates, make_stream_set(cfg), make_weather(cfg))
    world.load_state(snap["state"])
    return world


def run_simulation(
    cfg: AppConfig,
    out_dir: str | Path,
    ticks: int,
    *,
    world: World | None = None,
    resumed_from: str | None = None,
) -> Path:
    """Execute `ticks` steps and persist everything into a new run directory."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise RunError(f"cannot create run directory {out}: {exc}") from exc
    if any(out.iterdir()):
        raise RunError(f"run directory {out} is not empty")

    guard, baselines = validate_config(cfg)
    if not guard.ok:
        raise RunError("physics validation failed:\n" + str(guard))

    if world is None:
        world = make_world(cfg)
    config_hash = cfg.config_hash()
    start_tick = world.tick

    manifest = {
        "format": "mee-run",
        "version": SNAPSHOT_VERSION,
        "code_version": __version__,
        "config": cfg.to_dict(),
        "config_hash": config_hash,
        "master_seed": cfg.world.master_seed,
        "stream_layout": make_stream_set(cfg).layout_manifest(),
        "baselines": {kind.value: b for kind, b in baselines.items()},
        "start_tick": start_tick,
        "planned_ticks": ticks,
        "snapshot_every": cfg.run.snapshot_every,
        "hash_every": cfg.run.hash_every,
        "resumed_from": resumed_from,
    }
    (out / "manifest.json").write_text(canonical_json(manifest))

    snap_dir = out / "snapshots"
    snap_dir.mkdir()
    write_snapshot(snap_dir / f"snapshot_{start_tick:08d}.json.gz", snapshot_dict(world, config_hash))

    t0 = time.monotonic()
    hashes: list[tuple[int, str]] = []
    with (
        open(out / "timeseries.csv", "w", newline="") as ts_file,
        gzip.open(out / "ledger.csv.gz", "wt", newline="") as ledger_file,
        open(out / "events.jsonl", "w") as events_file,
    ):
        ts_writer = csv.writer(ts_file)
        ts_writer.writerow(TIMESERIES_COLUMNS)
        ledger_writer = csv.writer(ledger_file)
        ledger_writer.writerow(LEDGER_COLUMNS)

        for _ in range(ticks):
            report = world.step()
            err = report.mean_error_by_kind
            ts_writer.writerow(
                [
                    report.tick,
                    report.population,
                    report.births,
                    report.deaths,
                    repr(report.mean_energy),
                    repr(err.get("numeric", float("nan"))),
                    repr(err.get("text", float("nan"))),
                    repr(err.get("noise", float("nan"))),
                    repr(err.get("temporal", float("nan"))),
                    repr(err.get("emission", float("nan"))),
                    repr(report.noise_fraction),
                    repr(report.total_gain),
                    repr(report.total_compute),
                    repr(report.total_maintenance),
                ]
            )
            for rec in report.records:
                ledger_writer.writerow(
                    [
                        rec.tick,
                        rec.unit_id,
                        repr(rec.e_before),
                        repr(rec.gain),
                        repr(rec.compute_cost),
                        repr(rec.maintenance),
                        repr(rec.e_after),
                        repr(rec.surplus),
                        rec.v_in,
                        repr(rec.v_volume),
                        rec.v_repr,
                        repr(rec.error),
                        int(rec.corrupt),
                        _encode_pairs(rec.sources),
                        _encode_pairs(rec.volumes),
                    ]
                )
            for ev in report.birth_events:
                events_file.write(json.dumps({"type": "birth", **ev}) + "\n")
            for ev in report.death_events:
                events_file.write(json.dumps({"type": "death", **ev}) + "\n")
            if report.text_wrapped:
                events_file.write(json.dumps({"type": "corpus_wrap", "tick": report.tick}) + "\n")

            if world.tick % cfg.run.hash_every == 0:
                hashes.append((world.tick, world.state_hash()))
            if world.tick % cfg.run.snapshot_every == 0:
                write_snapshot(
                    snap_dir / f"snapshot_{world.tick:08d}.json.gz",
                    snapshot_dict(world, config_hash),
                )

    final_hash = world.state_hash()
    if not hashes or hashes[-1][0] != world.tick:
        hashes.append((world.tick, final_hash))
    with open(out / "hashes.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["tick", "state_hash"])
        writer.writerows(hashes)

    final_snap = snap_dir / f"snapshot_{world.tick:08d}.json.gz"
    if not final_snap.exists():
        write_snapshot(final_snap, snapshot_dict(world, config_hash))

    result = {
        "end_tick": world.tick,
        "final_hash": final_hash,
        "population": len(world.units),
        "collapsed": len(world.units) == 0,
        "wall_seconds": time.monotonic() - t0,
    }
    (out / "result.json").write_text(canonical_json(result))
    return out


def resume_run(run_dir: str | Path, out_dir: str | Path, ticks: int, *, snapshot_tick: int | None = None) -> Path:
    """Continue a run from its latest (or a chosen) snapshot into a new directory."""
    src = Path(run_dir)
    manifest = read_manifest(src)
    cfg = app_config_from_dict(manifest["config"])
    snaps = sorted((src / "snapshots").glob("snapshot_*.json.gz"))
    if not snaps:
        raise RunError(f"no snapshots under {src}")
    if snapshot_tick is None:
        snap_path = snaps[-1]
    else:
        snap_path = src / "snapshots" / f"snapshot_{snapshot_tick:08d}.json.gz"
        if not snap_path.exists():
            raise RunError(f"no snapshot at tick {snapshot_tick} under {src}")
    snap = read_snapshot(snap_path)
    world = world_from_snapshot(cfg, snap)
    return run_simulation(cfg, out_dir, ticks, world=world, resumed_from=str(snap_path))


def app_config_from_dict(data: dict) -> AppConfig:
    from .config import RunSettings, StreamSettings
    from .evolution import MutationRates
    from .physics import PhysicsParams
    from .world import WorldConfig

    try:
        return AppConfig(
            world=WorldConfig(**data["world"]),
            physics=PhysicsParams(**data["physics"]),
            rates=MutationRates(**data["rates"]),
            streams=StreamSettings(**data["streams"]),
            run=RunSettings(**data["run"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config in manifest: {exc}") from exc


# -- readers ------------------------------------------------------------------


def read_manifest(run_dir: Path) -> dict:
    path = Path(run_dir) / "manifest.json"
    if not path.exists():
        raise RunError(f"missing manifest: {path}")
    return json.loads(path.read_text())


def read_ledger(run_dir: Path) -> list[UnitTickRecord]:
    path = Path(run_dir) / "ledger.csv.gz"
    if not path.exists():
        raise RunError(f"missing ledger: {path}")
    records: list[UnitTickRecord] = []
    with gzip.open(path, "rt", newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            records.append(
                UnitTickRecord(
                    tick=int(row["tick"]),
                    unit_id=int(row["unit_id"]),
                    e_before=float(row["e_before"]),
                    gain=float(row["gain"]),
                    compute_cost=float(row["compute_cost"]),
                    maintenance=float(row["maintenance"]),
                    e_after=float(row["e_after"]),
                    surplus=float(row["surplus"]),
                    v_in=int(row["v_in"]),
                    v_volume=float(row["v_volume"]),
                    v_repr=int(row["v_repr"]),
                    error=float(row["error"]),
                    corrupt=bool(int(row["corrupt"])),
                    sources=_decode_pairs(row["sources"]),
                    volumes=_decode_pairs(row["volumes"]),
                )
            )
    return records


def read_timeseries(run_dir: Path) -> list[dict]:
    path = Path(run_dir) / "timeseries.csv"
    if not path.exists():
        raise RunError(f"missing timeseries: {path}")
    with open(path, newline="") as fh:
        return [dict(row) for row in csv.DictReader(fh)]


def read_snapshots(run_dir: Path) -> list[dict]:
    snaps = sorted((Path(run_dir) / "snapshots").glob("snapshot_*.json.gz"))
    return [read_snapshot(p) for p in snaps]


def final_population_genomes(run_dir: Path) -> dict[int, Genome]:
    snaps = read_snapshots(run_dir)
    if not snaps:
        raise RunError(f"no snapshots under {run_dir}")
    final = snaps[-1]
    return {u["uid"]: Genome.from_json_dict(u["genome"]) for u in final["state"]["units"]}


# -- analysis -----------------------------------------------------------------


def _write_csv(path: Path, header: list[str], rows: list) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def analyze_runs(run_dirs: list[str | Path], out_dir: str | Path) -> dict:
    """Produce report.json plus the underlying figure CSVs for one or more runs.

    Ecology collapse is flagged and windowed measurements are restricted to
    the ticks the population survived. Cross-run divergence needs at least
    two runs and says so otherwise.
    """
    if not run_dirs:
        raise RunError("analyze needs at least one run directory")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    per_run = []
    for rd in run_dirs:
        rd = Path(rd)
        manifest = read_manifest(rd)
        ledger = read_ledger(rd)
        timeseries = read_timeseries(rd)
        snapshots = read_snapshots(rd)
        window = manifest["config"]["world"]["profile_window"]
        baselines = {StreamKind(k): v for k, v in manifest["baselines"].items()}
        start_tick = manifest["start_tick"]

        pops = [(int(r["tick"]), int(r["population"])) for r in timeseries]
        live = [t for t, p in pops if p > 0]
        collapsed = bool(pops) and pops[-1][1] == 0
        last_live = live[-1] if live else start_tick

        run_report: dict = {
            "run_dir": str(rd),
            "master_seed": manifest["master_seed"],
            "collapsed": collapsed,
            "last_live_tick": last_live,
            "final_population": pops[-1][1] if pops else 0,
        }

        first_profiles = build_profiles(ledger, start_tick, start_tick + window)
        final_profiles = build_profiles(ledger, max(start_tick, last_live + 1 - window), last_live + 1)
        run_report["entropy_first"] = mean_specialization_entropy(first_profiles)
        run_report["entropy_final"] = mean_specialization_entropy(final_profiles)

        nf = [(int(r["tick"]), float(r["noise_fraction"])) for r in timeseries if int(r["tick"]) <= last_live]
        if nf:
            cut = max(1, len(nf) // 10)
            run_report["noise_fraction_first"] = float(np.mean([v for _, v in nf[:cut]]))
            run_report["noise_fraction_final"] = float(np.mean([v for _, v in nf[-cut:]]))
        else:
            run_report["noise_fraction_first"] = None
            run_report["noise_fraction_final"] = None

        _, trophic = assign_trophic_levels(final_profiles)
        run_report["trophic"] = trophic

        if len(snapshots) >= 2:
            comp = complexity_series(snapshots)
            run_report["complexity"] = {
                "node_slope": comp["node_slope"],
                "edge_slope": comp["edge_slope"],
            }
            _write_csv(
                out / f"complexity_{rd.name}.csv",
                ["tick", "mean_nodes", "mean_edges"],
                list(zip(comp["ticks"], comp["mean_nodes"], comp["mean_edges"])),
            )
        else:
            run_report["complexity"] = None

        eff_ticks, eff_series = efficiency_series(ledger, baselines)
        if eff_series:
            trend = mann_kendall(eff_series)
            run_report["efficiency"] = {"trend": trend, "points": len(eff_series)}
            _write_csv(
                out / f"efficiency_{rd.name}.csv",
                ["tick", "cost_per_error_reduction"],
                list(zip(eff_ticks, [repr(v) for v in eff_series])),
            )
        else:
            run_report["efficiency"] = None

        per_run.append(run_report)

    report: dict = {
        "notes": {
            "specialization_entropy": (
                "Shannon entropy (bits) of per-unit gain over the four stream"
                " kinds plus one emission bucket; range [0, log2 5]."
            ),
            "trend_predictions": (
                "trophic formation, complexity growth, and efficiency are"
                " measured and reported with trend statistics, never asserted."
            ),
        },
        "runs": per_run,
    }

    report["prediction_1_specialization"] = {
        "declined_runs": sum(
            1
            for r in per_run
            if r["entropy_first"] is not None
            and r["entropy_final"] is not None
            and r["entropy_final"] < r["entropy_first"]
        ),
        "eligible_runs": sum(
            1 for r in per_run if r["entropy_first"] is not None and r["entropy_final"] is not None
        ),
    }
    report["prediction_2_noise_avoidance"] = {
        "declined_runs": sum(
            1
            for r in per_run
            if r["noise_fraction_first"] is not None
            and r["noise_fraction_final"] is not None
            and r["noise_fraction_final"] < r["noise_fraction_first"]
        ),
        "eligible_runs": sum(1 for r in per_run if r["noise_fraction_first"] is not None),
    }
    report["prediction_3_trophic"] = [r["trophic"]["histogram"] for r in per_run]
    report["prediction_5_complexity"] = [r["complexity"] for r in per_run]
    report["prediction_6_efficiency"] = [r["efficiency"] for r in per_run]

    if len(run_dirs) >= 2:
        pairs = []
        populations = {str(rd): final_population_genomes(Path(rd)) for rd in run_dirs}
        names = [str(rd) for rd in run_dirs]
        for i in range(len(names)):
            for j in range(i + 1, len(names)):
                a, b = populations[names[i]], populations[names[j]]
                if not a or not b:
                    pairs.append({"runs": [names[i], names[j]], "status": "empty population"})
                    continue
                inter, intra = path_divergence(a, b)
                pairs.append(
                    {
                        "runs": [names[i], names[j]],
                        "inter": inter,
                        "intra": intra,
                        "diverged": inter > intra,
                    }
                )
        report["prediction_4_path_divergence"] = pairs
    else:
        report["prediction_4_path_divergence"] = {"status": "requires >= 2 runs"}

    report["collapsed_runs"] = [r["run_dir"] for r in per_run if r["collapsed"]]

    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True))
    return report
