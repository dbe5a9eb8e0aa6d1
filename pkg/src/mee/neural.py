"""One processing cycle of a unit's internal recurrent network.

Each cycle produces two distinct outputs: an internal prediction of the
next sensory window (used only for the unit's own energy accounting) and
an external emission deposited into the environment for neighbors to
absorb. No gradients are computed anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .genome import Genome

# Clamp for discrete-channel predictions. Keeps cross-entropy finite and
# caps how catastrophically a saturated readout can be scored per bit.
EPS_P = 0.05

# Channel-to-node role tables, keyed by (node_count, width). Tiny and hot.
_ROLE_CACHE: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}


def _roles(node_count: int, width: int) -> tuple[np.ndarray, np.ndarray]:
    key = (node_count, width)
    cached = _ROLE_CACHE.get(key)
    if cached is None:
        inj = np.arange(width) % node_count
        pred = (node_count - 1) - inj
        cached = (inj, pred)
        _ROLE_CACHE[key] = cached
    return cached


@dataclass
class NetState:
    """Carried network state: post-ReLU activations and the standing
    one-step-ahead prediction produced by the previous cycle."""

    activations: np.ndarray
    last_prediction: np.ndarray


@dataclass(frozen=True)
class CycleOutput:
    prediction_next: np.ndarray
    emission: np.ndarray
    v_repr: int
    k_cost: float
    corrupt: bool = False


def fresh_state(genome: Genome, sensory_width: int) -> NetState:
    """Zeroed state with a mid-range standing prediction."""
    return NetState(
        activations=np.zeros(genome.node_count),
        last_prediction=np.full(sensory_width, 0.5),
    )


def _squash(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(z, -60.0, 60.0)))


def forward_cycle(
    genome: Genome,
    state: NetState,
    sensory: np.ndarray,
    *,
    tau: float,
    discrete_mask: np.ndarray,
    emission_slots: int,
) -> tuple[NetState, CycleOutput]:
    """Run one cycle: inject, propagate, read out prediction and emission.

    Sensory values are pre-loaded additively onto the carried activations at
    the designated input nodes, then `propagation_steps` synchronous updates
    a <- ReLU(W a) run. Predictions are squashed from the readout nodes'
    final pre-activations (signed, so evolved inhibitory weights can express
    probabilities below one half); the zero network predicts exactly 0.5.

    A non-finite activation anywhere marks the unit corrupt for the tick:
    the cycle reports no active nodes, a mid-range prediction, and no
    emission, and the carried state is reset to zero.
    """
    n = genome.node_count
    width = len(sensory)
    steps = genome.params.propagation_steps
    inj_idx, pred_nodes = _roles(n, width)

    a = state.activations + np.bincount(inj_idx, weights=sensory, minlength=n)

    src = genome.conn_src
    dst = genome.conn_dst
    w = genome.conn_weight
    z = np.zeros(n)
    if len(src):
        with np.errstate(over="ignore", invalid="ignore"):
            for _ in range(steps):
                z = np.bincount(dst, weights=w * a[src], minlength=n)
                a = np.maximum(z, 0.0)
    else:
        a = np.zeros(n)

    k_cost = float(np.count_nonzero(w)) * steps

    if not np.isfinite(a).all():
        zero = fresh_state(genome, width)
        return zero, CycleOutput(
            prediction_next=zero.last_prediction.copy(),
            emission=np.zeros(emission_slots),
            v_repr=0,
            k_cost=k_cost,
            corrupt=True,
        )

    prediction = _squash(z[pred_nodes])
    np.clip(
        prediction,
        EPS_P,
        1.0 - EPS_P,
        out=prediction,
        where=np.asarray(discrete_mask, dtype=bool),
    )

    emission = np.zeros(emission_slots)
    ew = min(genome.interface.emission_width, emission_slots)
    if ew:
        em_nodes = (n - 1) - ((width + np.arange(ew)) % n)
        emission[:ew] = a[em_nodes] * genome.interface.emission_gain

    v_repr = int(np.count_nonzero(a > tau))

    new_state = NetState(activations=a, last_prediction=prediction)
    return new_state, CycleOutput(
        prediction_next=prediction,
        emission=emission,
        v_repr=v_repr,
        k_cost=k_cost,
    )
