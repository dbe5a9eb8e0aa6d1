"""Offline measurements over run telemetry: the six ecology predictions.

Every function here is a pure function of ledger rows and snapshots, so an
analysis can be re-run at any time with identical output. Trend-shaped
predictions (trophic structure, complexity growth, efficiency) are
measured and reported, never asserted: an honest negative is a result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .genome import Genome, genome_distance
from .rngs import TAG_SAMPLER, substream
from .streams import StreamKind
from .world import EMISSION_SOURCE, UnitTickRecord

STREAM_BUCKETS = tuple(kind.value for kind in StreamKind)
ALL_BUCKETS = STREAM_BUCKETS + (EMISSION_SOURCE,)
EPS_EFFICIENCY = 1e-6
TROPHIC_DEPTH_CAP = 8


@dataclass
class UnitEnergyProfile:
    """Cumulative per-source gain and sensed volume over a tick window."""

    unit_id: int
    gains: dict = field(default_factory=dict)
    volumes: dict = field(default_factory=dict)
    admits_noise: bool | None = None

    @property
    def total_gain(self) -> float:
        return sum(self.gains.values())

    def bucket_gains(self) -> dict:
        """Gains folded into the four stream kinds plus one emission bucket."""
        out = {b: 0.0 for b in ALL_BUCKETS}
        for src, g in self.gains.items():
            bucket = EMISSION_SOURCE if src.startswith("unit:") else src
            out[bucket] = out.get(bucket, 0.0) + g
        return out

    def emitter_gains(self) -> dict:
        return {
            int(src.split(":", 1)[1]): g for src, g in self.gains.items() if src.startswith("unit:")
        }


def build_profiles(
    records: list[UnitTickRecord], start_tick: int, end_tick: int
) -> dict[int, UnitEnergyProfile]:
    """Aggregate ledger rows with start_tick <= tick < end_tick per unit."""
    profiles: dict[int, UnitEnergyProfile] = {}
    for rec in records:
        if not start_tick <= rec.tick < end_tick:
            continue
        prof = profiles.setdefault(rec.unit_id, UnitEnergyProfile(unit_id=rec.unit_id))
        for src, share in rec.sources:
            prof.gains[src] = prof.gains.get(src, 0.0) + rec.gain * share
        for bucket, vol in rec.volumes:
            prof.volumes[bucket] = prof.volumes.get(bucket, 0.0) + vol
    return profiles


# -- prediction 1: specialization ---------------------------------------------


def specialization_entropy(profile: UnitEnergyProfile) -> float:
    """Shannon entropy (bits) of the unit's gain distribution over sources.

    Buckets are the four stream kinds plus emission-sourced gain, so the
    range is [0, log2 5]. Undefined for a unit with zero windowed gain.
    """
    total = profile.total_gain
    if total <= 0.0:
        raise ValueError("specialization entropy undefined for zero total gain")
    h = 0.0
    for g in profile.bucket_gains().values():
        if g > 0.0:
            p = g / total
            h -= p * math.log2(p)
    return h


def mean_specialization_entropy(profiles: dict[int, UnitEnergyProfile]) -> float | None:
    """Population mean; units with no windowed gain are excluded."""
    values = [
        specialization_entropy(p) for p in profiles.values() if p.total_gain > 0.0
    ]
    if not values:
        return None
    return float(np.mean(values))


# -- prediction 2: noise avoidance --------------------------------------------


def noise_fraction(profiles: dict[int, UnitEnergyProfile]) -> float:
    """Fraction of units that admit noise channels and draw more than a
    quarter of their windowed sensed volume from them."""
    if not profiles:
        raise ValueError("noise_fraction needs a non-empty population")
    qualifying = 0
    for prof in profiles.values():
        if prof.admits_noise is False:
            continue
        total = sum(prof.volumes.values())
        noise = prof.volumes.get(StreamKind.NOISE.value, 0.0)
        if total > 0.0 and noise > 0.25 * total:
            qualifying += 1
    return qualifying / len(profiles)


# -- prediction 3: trophic structure ------------------------------------------


@dataclass(frozen=True)
class TrophicAssignment:
    unit_id: int
    level: int


def _strongly_connected(graph: dict[int, set[int]]) -> list[set[int]]:
    """Tarjan's SCC, iterative (adversarial cycles must not blow the stack)."""
    index: dict[int, int] = {}
    low: dict[int, int] = {}
    on_stack: set[int] = set()
    stack: list[int] = []
    sccs: list[set[int]] = []
    counter = [0]

    for root in graph:
        if root in index:
            continue
        work = [(root, iter(graph.get(root, ())))]
        index[root] = low[root] = counter[0]
        counter[0] += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            node, it = work[-1]
            advanced = False
            for nxt in it:
                if nxt not in graph:
                    continue
                if nxt not in index:
                    index[nxt] = low[nxt] = counter[0]
                    counter[0] += 1
                    stack.append(nxt)
                    on_stack.add(nxt)
                    work.append((nxt, iter(graph.get(nxt, ()))))
                    advanced = True
                    break
                elif nxt in on_stack:
                    low[node] = min(low[node], index[nxt])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                comp = set()
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.add(w)
                    if w == node:
                        break
                sccs.append(comp)
    return sccs


def assign_trophic_levels(
    profiles: dict[int, UnitEnergyProfile],
) -> tuple[dict[int, TrophicAssignment], dict]:
    """Majority-source trophic levels plus the inter-level gain-flow matrix.

    Level 1 means more than half the windowed gain came from raw streams;
    a unit majority-fed by emitters sits one level above the highest of
    those emitters (depth cap 8). Cycles in the majority-source graph
    collapse to the minimal level any member could claim from outside the
    cycle, so mutual feeders with no external producers are level 1. Raw
    streams are level 0 in the flow matrix.
    """
    majority_sources: dict[int, set[int]] = {}
    stream_majority: dict[int, bool] = {}
    for uid, prof in profiles.items():
        total = prof.total_gain
        emitters = prof.emitter_gains()
        emitter_total = sum(emitters.values())
        stream_total = total - emitter_total
        if total <= 0.0 or stream_total > 0.5 * total:
            stream_majority[uid] = True
            majority_sources[uid] = set()
        else:
            stream_majority[uid] = False
            majority_sources[uid] = {e for e in emitters if e in profiles}

    graph = {uid: majority_sources[uid] for uid in profiles}
    levels: dict[int, int] = {}
    # Tarjan emits each component only after every component it depends on
    # (its sources) has been emitted, so levels resolve in one pass.
    for comp in _strongly_connected(graph):
        members = []
        for uid in comp:
            if stream_majority[uid]:
                members.append(1)
                continue
            external = [levels[e] for e in majority_sources[uid] if e not in comp]
            members.append(1 + max(external) if external else 1)
        floor_level = min(min(members), TROPHIC_DEPTH_CAP)
        for uid in comp:
            levels[uid] = floor_level

    assignments = {uid: TrophicAssignment(uid, lvl) for uid, lvl in levels.items()}

    flow: dict[tuple[int, int], float] = {}
    for uid, prof in profiles.items():
        consumer = levels[uid]
        for src, g in prof.gains.items():
            if src.startswith("unit:"):
                emitter = int(src.split(":", 1)[1])
                source_level = levels.get(emitter, 1)
            else:
                source_level = 0
            key = (source_level, consumer)
            flow[key] = flow.get(key, 0.0) + g

    histogram: dict[int, int] = {}
    for lvl in levels.values():
        histogram[lvl] = histogram.get(lvl, 0) + 1
    return assignments, {
        "histogram": histogram,
        "flow": {f"{a}->{b}": v for (a, b), v in sorted(flow.items())},
    }


# -- prediction 4: path divergence --------------------------------------------


def _pair_distances(
    pop_a: dict[int, Genome],
    pop_b: dict[int, Genome],
    rng: np.random.Generator,
    cap: int,
    same_population: bool,
) -> float:
    ids_a = sorted(pop_a)
    ids_b = sorted(pop_b)
    if same_population:
        pairs = [(i, j) for ii, i in enumerate(ids_a) for j in ids_a[ii + 1 :]]
    else:
        pairs = [(i, j) for i in ids_a for j in ids_b if i != j]
    if not pairs:
        return 0.0
    if len(pairs) > cap:
        idx = rng.choice(len(pairs), size=cap, replace=False)
        pairs = [pairs[int(k)] for k in sorted(idx)]
    if same_population:
        return float(np.mean([genome_distance(pop_a[i], pop_a[j]) for i, j in pairs]))
    return float(np.mean([genome_distance(pop_a[i], pop_b[j]) for i, j in pairs]))


def path_divergence(
    pop_a: dict[int, Genome],
    pop_b: dict[int, Genome],
    sample_seed: int = 0,
    cap: int = 10_000,
) -> tuple[float, float]:
    """(inter, intra) mean genome distance between and within two final
    populations. Sampling above the pair cap is seed-deterministic."""
    if not pop_a or not pop_b:
        raise ValueError("path_divergence needs two non-empty populations")
    rng = substream(sample_seed, TAG_SAMPLER)
    inter = _pair_distances(pop_a, pop_b, rng, cap, same_population=False)
    intra_a = _pair_distances(pop_a, pop_a, rng, cap // 2, same_population=True)
    intra_b = _pair_distances(pop_b, pop_b, rng, cap // 2, same_population=True)
    n_a = len(pop_a)
    n_b = len(pop_b)
    pairs_a = n_a * (n_a - 1) / 2
    pairs_b = n_b * (n_b - 1) / 2
    if pairs_a + pairs_b == 0:
        intra = 0.0
    else:
        intra = (intra_a * pairs_a + intra_b * pairs_b) / (pairs_a + pairs_b)
    return inter, intra


# -- prediction 5: complexity growth ------------------------------------------


def complexity_series(snapshots: list[dict]) -> dict:
    """Mean node and edge counts per snapshot plus least-squares slopes."""
    if len(snapshots) < 2:
        raise ValueError("complexity_series needs at least two snapshots")
    ticks = []
    mean_nodes = []
    mean_edges = []
    for snap in snapshots:
        units = snap["state"]["units"]
        ticks.append(snap["state"]["tick"])
        if units:
            mean_nodes.append(float(np.mean([u["genome"]["node_count"] for u in units])))
            mean_edges.append(float(np.mean([len(u["genome"]["connections"]) for u in units])))
        else:
            mean_nodes.append(0.0)
            mean_edges.append(0.0)
    t = np.asarray(ticks, dtype=np.float64)
    node_slope = float(np.polyfit(t, mean_nodes, 1)[0]) if len(t) > 1 else 0.0
    edge_slope = float(np.polyfit(t, mean_edges, 1)[0]) if len(t) > 1 else 0.0
    return {
        "ticks": ticks,
        "mean_nodes": mean_nodes,
        "mean_edges": mean_edges,
        "node_slope": node_slope,
        "edge_slope": edge_slope,
    }


# -- prediction 6: efficiency --------------------------------------------------


def efficiency_series(
    records: list[UnitTickRecord], baselines: dict, eps: float = EPS_EFFICIENCY
) -> tuple[list[int], list[float]]:
    """Per tick: total processing cost per unit of error reduced below the
    naive baseline. A population no better than naive spikes toward the
    epsilon guard; that spike is reported, not hidden."""
    base_by_name = {
        kind.value if isinstance(kind, StreamKind) else str(kind): b
        for kind, b in baselines.items()
    }
    by_tick: dict[int, tuple[float, float]] = {}
    for rec in records:
        if rec.v_in <= 0:
            continue
        vols = dict(rec.volumes)
        stream_vol = sum(v for k, v in vols.items() if k in base_by_name)
        if stream_vol <= 0.0:
            continue
        baseline_u = sum(base_by_name[k] * v for k, v in vols.items() if k in base_by_name)
        baseline_u /= stream_vol
        reduction = max(baseline_u - rec.error, eps)
        cost = rec.compute_cost + rec.maintenance
        c, r = by_tick.get(rec.tick, (0.0, 0.0))
        by_tick[rec.tick] = (c + cost, r + reduction)
    ticks = sorted(by_tick)
    series = [by_tick[t][0] / by_tick[t][1] for t in ticks]
    return ticks, series


def mann_kendall(series: list[float]) -> dict:
    """Mann-Kendall trend statistic with the normal approximation.

    Returns S, z, the two-sided p-value, and the trend direction at the
    5 percent level.
    """
    x = np.asarray(series, dtype=np.float64)
    n = len(x)
    if n < 3:
        return {"s": 0, "z": 0.0, "p": 1.0, "trend": "none"}
    s = 0
    for i in range(n - 1):
        s += int(np.sign(x[i + 1 :] - x[i]).sum())
    # Tie-corrected variance.
    _, counts = np.unique(x, return_counts=True)
    tie_term = sum(c * (c - 1) * (2 * c + 5) for c in counts if c > 1)
    var = (n * (n - 1) * (2 * n + 5) - tie_term) / 18.0
    if var <= 0:
        return {"s": s, "z": 0.0, "p": 1.0, "trend": "none"}
    if s > 0:
        z = (s - 1) / math.sqrt(var)
    elif s < 0:
        z = (s + 1) / math.sqrt(var)
    else:
        z = 0.0
    p = math.erfc(abs(z) / math.sqrt(2.0))
    trend = "none"
    if p < 0.05:
        trend = "increasing" if z > 0 else "decreasing"
    return {"s": s, "z": z, "p": p, "trend": trend}
