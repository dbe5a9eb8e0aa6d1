"""Within-lifetime learning: the three-factor Hebbian update.

Weight change is gated by the tick's energy surplus: profitable cycles
strengthen the pathways that were active, deficit cycles weaken them, and
a small decay pulls every weight back toward zero. Weights may cross zero
and turn inhibitory.
"""

from __future__ import annotations

import numpy as np

from .genome import Genome
from .neural import NetState, forward_cycle, fresh_state
from .physics import PhysicsParams, compression_ratio, energy_update, prediction_error
from .rngs import TAG_LOCKIN, substream


def hebbian_update(
    genome: Genome,
    state: NetState,
    surplus: float,
    p: PhysicsParams,
) -> tuple[Genome, int]:
    """Apply dw = eta * surplus * x_src * y_dst - lambda * w to every connection.

    Activations are the final values of the cycle that produced the surplus.
    Weights are clamped to [-w_cap, w_cap]; any non-finite result is reset
    to zero and counted for corruption telemetry. Returns the updated genome
    and the number of reset weights.
    """
    if genome.n_connections == 0:
        return genome, 0
    acts = state.activations
    x = acts[genome.conn_src]
    y = acts[genome.conn_dst]
    w = genome.conn_weight
    with np.errstate(over="ignore", invalid="ignore"):
        new_w = w + p.eta * surplus * x * y - p.lambda_decay * w
    bad = ~np.isfinite(new_w)
    n_reset = int(bad.sum())
    if n_reset:
        new_w = np.where(bad, 0.0, new_w)
    np.clip(new_w, -p.w_cap, p.w_cap, out=new_w)
    return genome.with_weights(new_w), n_reset


# -- two-pathway lock-in harness ---------------------------------------------
#
# A minimal unit with two parallel chains from the input to the readout,
# symmetric up to a small jitter, fed a compressible slow signal whose
# steady surplus keeps the update in the positive-reinforcement regime.
# Whichever chain is carrying more activity in the earliest ticks is the
# chain the reinforcement compounds, and it stays dominant: the urn
# behavior the three-factor rule is meant to exhibit.

_LOCKIN_PHYSICS = PhysicsParams(
    alpha=1.5,
    beta=0.05,
    gamma=0.3,
    tau=0.05,
    eta=0.05,
    lambda_decay=2e-4,
    e_start=100.0,
    repro_threshold=200.0,
    w_cap=3.0,
)

# Node roles for node_count=5 with a 1-channel sensory window:
# input channel 0 injects at node 0; prediction slot 0 reads node 4.
_N_INPUT = 0
_PATH_A = 1
_PATH_B = 2
_READOUT = 4

_PATH_EDGES = {
    "a": ((_N_INPUT, _PATH_A), (_PATH_A, _READOUT)),
    "b": ((_N_INPUT, _PATH_B), (_PATH_B, _READOUT)),
}


def _lockin_genome(rng: np.random.Generator) -> Genome:
    from .genome import InterfaceGenes, OperationalGenes

    edges = [
        (_N_INPUT, _PATH_A),
        (_N_INPUT, _PATH_B),
        (_PATH_A, _READOUT),
        (_PATH_B, _READOUT),
    ]
    w = np.full(len(edges), 0.6) + rng.uniform(-0.08, 0.08, len(edges))
    return Genome(
        node_count=5,
        conn_src=np.array([e[0] for e in edges], dtype=np.int64),
        conn_dst=np.array([e[1] for e in edges], dtype=np.int64),
        conn_weight=w,
        interface=InterfaceGenes(emission_width=1, emission_gain=1.0, receptor_mask=(1,)),
        params=OperationalGenes(propagation_steps=1, move_prob=0.0),
    )


def _pathway_mass(genome: Genome, path: str) -> float:
    weights = genome.weight_map()
    return sum(abs(weights.get(edge, 0.0)) for edge in _PATH_EDGES[path])


def _pathway_activity(state: NetState, path: str) -> float:
    node = _PATH_A if path == "a" else _PATH_B
    return float(state.activations[node])


def lockin_replicate(master_seed: int, replicate: int, ticks: int = 2000) -> tuple[str, str]:
    """Run one replicate; returns (early winner, final winner) by pathway name.

    The early winner has the larger cumulative surplus-weighted activation
    over the first 20 ticks; the final winner has the larger total weight
    mass at the end. One priming cycle runs before the clock starts so the
    unit is scored (and earning) from the first tick.
    """
    rng = substream(master_seed, TAG_LOCKIN, replicate)
    genome = _lockin_genome(rng)
    state = fresh_state(genome, 1)
    p = _LOCKIN_PHYSICS
    discrete = np.array([False])
    state, cycle = forward_cycle(
        genome, state, np.array([0.75]), tau=p.tau, discrete_mask=discrete, emission_slots=1
    )
    last_v_repr = cycle.v_repr
    last_k = cycle.k_cost
    early: dict[str, float] = {"a": 0.0, "b": 0.0}

    for t in range(ticks):
        signal = 0.75 + 0.05 * np.sin(2.0 * np.pi * t / 50.0)
        actual = np.array([signal])
        err = prediction_error(actual, state.last_prediction, discrete)
        c = compression_ratio(1.0, last_v_repr, err)
        _, surplus = energy_update(0.0, c, 1.0, last_k, p)
        genome, _ = hebbian_update(genome, state, surplus, p)
        if t < 20:
            for path in ("a", "b"):
                early[path] += surplus * _pathway_activity(state, path)
        state, cycle = forward_cycle(
            genome, state, actual, tau=p.tau, discrete_mask=discrete, emission_slots=1
        )
        last_v_repr = cycle.v_repr
        last_k = cycle.k_cost

    final = "a" if _pathway_mass(genome, "a") > _pathway_mass(genome, "b") else "b"
    early_winner = "a" if early["a"] > early["b"] else "b"
    return early_winner, final


def lockin_agreement(master_seed: int, replicates: int = 1000, ticks: int = 2000) -> float:
    """Fraction of replicates whose early-dominant pathway is still dominant
    at the final tick."""
    agree = 0
    for r in range(replicates):
        early, final = lockin_replicate(master_seed, r, ticks)
        agree += early == final
    return agree / replicates
