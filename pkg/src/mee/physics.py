"""The environmental laws: error metrics, compression ratio, energy update,
and the trivial-collapse guard.

These are the physics of the ecology. They are set by the researcher,
validated once at startup, and held constant; nothing in here evaluates a
unit against any goal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class PhysicsParams:
    """Environmental constants. tau is part of the physics, not the phenotype."""

    alpha: float = 0.03
    beta: float = 0.01
    gamma: float = 1.0
    tau: float = 0.05
    eta: float = 0.003
    lambda_decay: float = 3e-4
    e_start: float = 200.0
    repro_threshold: float = 400.0
    v_max: float = 64.0
    w_cap: float = 10.0

    def __post_init__(self) -> None:
        for name in ("alpha", "beta", "gamma", "tau", "eta", "e_start", "v_max", "w_cap"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.lambda_decay < 0:
            raise ValueError("lambda_decay must be >= 0")
        if not self.repro_threshold > self.e_start:
            raise ValueError("repro_threshold must exceed e_start")


@dataclass(frozen=True)
class EnergyLedgerEntry:
    """Per-unit, per-tick energy bookkeeping with provenance.

    Sources attribute the gain to stream kinds or to emitting units; shares
    sum to one whenever gain is positive and are empty otherwise. Energy is
    not conserved across trophic levels: a consumer's gain is never
    subtracted from the producer it feeds on.
    """

    tick: int
    unit_id: int
    gain: float
    compute_cost: float
    maintenance: float
    sources: tuple[tuple[str, float], ...] = field(default_factory=tuple)


def prediction_error(actual: np.ndarray, predicted: np.ndarray, discrete: np.ndarray) -> float:
    """Mean per-channel error over the scored channels.

    Continuous channels contribute squared error (values live in [0, 1]);
    discrete channels contribute binary cross-entropy per bit. Callers pass
    only the channels that carried data this tick; an empty slice scores 0.
    """
    actual = np.asarray(actual, dtype=np.float64)
    predicted = np.asarray(predicted, dtype=np.float64)
    discrete = np.asarray(discrete, dtype=bool)
    if not (len(actual) == len(predicted) == len(discrete)):
        raise ValueError("prediction_error: mismatched channel vectors")
    if len(actual) == 0:
        return 0.0
    errs = np.empty(len(actual))
    cont = ~discrete
    diff = actual[cont] - predicted[cont]
    errs[cont] = diff * diff
    b = actual[discrete]
    p = predicted[discrete]
    errs[discrete] = -(b * np.log(p) + (1.0 - b) * np.log(1.0 - p))
    return float(errs.mean())


def compression_ratio(v_in: float, v_repr: int, error: float) -> float:
    """Dimensionality ratio weighted by prediction accuracy.

    A fully dormant network (v_repr = 0) or a tick with no data earns
    nothing: dormancy is metabolically equivalent to processing failure.
    """
    if v_repr <= 0 or v_in <= 0:
        return 0.0
    return (v_in / v_repr) * math.exp(-error)


def energy_update(e: float, c: float, v: float, k: float, p: PhysicsParams) -> tuple[float, float]:
    """One tick of the energy law.

    Returns (e_next, surplus). The surplus feeding Hebbian plasticity
    excludes the static maintenance cost, so steady upkeep does not bias
    every weight update negative.
    """
    gain = p.alpha * c * v
    e_next = e + gain - p.beta * k - p.gamma
    surplus = gain - p.beta * k
    return e_next, surplus


@dataclass(frozen=True)
class GuardReport:
    """Result of validating physics against the naive-predictor baselines."""

    ok: bool
    worst_margin: float
    lines: tuple[str, ...]

    def __str__(self) -> str:
        return "\n".join(self.lines)


def validate_params(p: PhysicsParams, w_s: int, baselines: dict) -> GuardReport:
    """Check the trivial-collapse guard: alpha * w_s * exp(-baseline) < gamma.

    The inequality must hold for every stream kind's baseline error,
    otherwise a degenerate network earning energy from a naive-quality
    prediction over the full sensory width could outlive its maintenance
    cost. Violations are reported with a machine-parseable GUARD-FAIL prefix.
    """
    lines: list[str] = []
    worst = math.inf
    ok = True
    for kind in sorted(baselines, key=str):
        b = baselines[kind]
        lhs = p.alpha * w_s * math.exp(-b)
        margin = p.gamma - lhs
        worst = min(worst, margin)
        name = getattr(kind, "value", kind)
        if lhs < p.gamma:
            lines.append(
                f"guard ok [{name}]: alpha*W*exp(-baseline) = {lhs:.6g} < gamma = {p.gamma:.6g}"
                f" (margin {margin:.6g})"
            )
        else:
            ok = False
            lines.append(
                f"GUARD-FAIL [{name}]: alpha*W*exp(-baseline) = {lhs:.6g} >= gamma = {p.gamma:.6g}"
                f" (baseline error {b:.6g})"
            )
    return GuardReport(ok=ok, worst_margin=worst, lines=tuple(lines))


def run_baseline_oracle(stream_set, ticks: int, master_seed: int) -> dict:
    """Mean error of the best naive predictor per stream kind.

    Two naive strategies are simulated against the raw generators at full
    intensity: previous-value pass-through and a constant mid-range guess.
    The smaller mean error per kind is returned; it anchors both the
    startup guard and the efficiency metric.
    """
    from .streams import StreamKind  # local import to keep module layering flat

    if ticks < 1000:
        raise ValueError("baseline oracle needs at least 1000 ticks")
    eps = 1e-3

    sums_prev: dict = {}
    sums_const: dict = {}
    counts: dict = {}
    prev_window: dict = {}
    for t in range(ticks):
        windows = stream_set.base_windows(t, master_seed)
        for cfg, values in windows.items():
            kind = cfg.kind
            disc = np.full(len(values), cfg.discrete)
            const_pred = np.full(len(values), 0.5)
            sums_const[kind] = sums_const.get(kind, 0.0) + prediction_error(values, const_pred, disc)
            if cfg in prev_window:
                prev_pred = prev_window[cfg]
                if cfg.discrete:
                    prev_pred = np.clip(prev_pred, eps, 1.0 - eps)
                sums_prev[kind] = sums_prev.get(kind, 0.0) + prediction_error(values, prev_pred, disc)
                counts[kind] = counts.get(kind, 0) + 1
            prev_window[cfg] = values

    out = {}
    for kind in StreamKind:
        if kind not in counts:
            continue
        n = counts[kind]
        # The constant predictor saw one extra tick; normalize by its own count.
        mean_const = sums_const[kind] / (n + 1)
        mean_prev = sums_prev[kind] / n
        out[kind] = min(mean_const, mean_prev)
    return out
