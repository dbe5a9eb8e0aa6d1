"""Blind variation: the mutation and recombination operators.

Every operator takes only a genome, the rates, and a random stream. None
of them can see energy, prediction error, or stream data, so variation is
structurally incapable of being directed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .genome import (
    NODE_MAX,
    PROPAGATION_CAP,
    Genome,
    InterfaceGenes,
    OperationalGenes,
    readout_node,
)


@dataclass(frozen=True)
class MutationRates:
    weight_rate: float = 0.01
    weight_sigma: float = 0.05
    topo_rate: float = 0.05
    param_rate: float = 0.05
    interface_factor: float = 0.01
    recomb_prob: float = 0.25

    def __post_init__(self) -> None:
        for name in ("weight_rate", "topo_rate", "param_rate", "interface_factor", "recomb_prob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if not self.weight_sigma > 0:
            raise ValueError("weight_sigma must be > 0")


def mutate_weights(g: Genome, r: MutationRates, rng: np.random.Generator) -> Genome:
    """Independently perturb each connection with probability weight_rate."""
    n = g.n_connections
    if n == 0 or r.weight_rate == 0.0:
        return g
    hit = rng.random(n) < r.weight_rate
    if not hit.any():
        return g
    delta = np.where(hit, rng.normal(0.0, r.weight_sigma, n), 0.0)
    return g.with_weights(g.conn_weight + delta)


def _readout_nodes(node_count: int, sensory_width: int, emission_slots: int) -> set[int]:
    return {readout_node(o, node_count) for o in range(sensory_width + emission_slots)}


def mutate_topology(
    g: Genome,
    r: MutationRates,
    rng: np.random.Generator,
    *,
    sensory_width: int,
    emission_slots: int,
    node_max: int = NODE_MAX,
    strict_blind_deletion: bool = False,
) -> Genome:
    """With probability topo_rate, apply one structural change.

    The change is chosen uniformly among the applicable options: split an
    edge through a fresh node (new edges get weights 1.0 and the old
    weight), add a missing edge, or delete an edge. Unless
    strict_blind_deletion is set, deletions that would leave no edge into
    any readout node are skipped; such offspring are dead the moment they
    are born and would only burn simulation budget.
    """
    if rng.random() >= r.topo_rate:
        return g

    n = g.node_count
    edges = list(zip(g.conn_src.tolist(), g.conn_dst.tolist(), g.conn_weight.tolist()))
    keys = {(s, d) for s, d, _ in edges}

    options: list[str] = []
    if edges and n < node_max:
        options.append("split")
    if len(keys) < n * n:
        options.append("add")
    deletable: list[int] = []
    if edges:
        if strict_blind_deletion:
            deletable = list(range(len(edges)))
        else:
            readouts = _readout_nodes(n, sensory_width, emission_slots)
            feeding = [i for i, (_, d, _) in enumerate(edges) if d in readouts]
            for i in range(len(edges)):
                remaining_feed = [j for j in feeding if j != i]
                if remaining_feed:
                    deletable.append(i)
    if deletable:
        options.append("delete")
    if not options:
        return g

    choice = options[rng.integers(len(options))]
    if choice == "split":
        idx = int(rng.integers(len(edges)))
        src, dst, w = edges.pop(idx)
        new_node = n
        edges.append((src, new_node, 1.0))
        edges.append((new_node, dst, w))
        n += 1
    elif choice == "add":
        # Sample until a missing key turns up; the key space is tiny.
        while True:
            src = int(rng.integers(n))
            dst = int(rng.integers(n))
            if (src, dst) not in keys:
                edges.append((src, dst, float(rng.normal(0.0, r.weight_sigma))))
                break
    else:
        idx = deletable[rng.integers(len(deletable))]
        edges.pop(idx)

    return Genome(
        node_count=n,
        conn_src=np.array([e[0] for e in edges], dtype=np.int64),
        conn_dst=np.array([e[1] for e in edges], dtype=np.int64),
        conn_weight=np.array([e[2] for e in edges], dtype=np.float64),
        interface=g.interface,
        params=g.params,
    )


def mutate_params_and_interface(
    g: Genome,
    r: MutationRates,
    rng: np.random.Generator,
    *,
    emission_slots: int,
    propagation_cap: int = PROPAGATION_CAP,
) -> Genome:
    """Operational genes mutate at param_rate; boundary genes at roughly a
    hundredth of that (interface viscosity), keeping inter-unit formats
    stable on the timescale of internal adaptation."""
    params = g.params
    steps = params.propagation_steps
    move = params.move_prob
    if rng.random() < r.param_rate:
        steps = int(np.clip(steps + rng.choice((-1, 1)), 1, propagation_cap))
    if rng.random() < r.param_rate:
        move = float(np.clip(move + rng.normal(0.0, 0.02), 0.0, 1.0))

    iface_rate = r.param_rate * r.interface_factor
    mask = list(g.interface.receptor_mask)
    width = g.interface.emission_width
    gain = g.interface.emission_gain
    if rng.random() < iface_rate:
        bit = int(rng.integers(len(mask)))
        if mask[bit] == 1 and sum(mask) == 1:
            unset = [i for i, b in enumerate(mask) if b == 0]
            if unset:
                bit = unset[int(rng.integers(len(unset)))]
        mask[bit] = 1 - mask[bit]
    if rng.random() < iface_rate:
        width = int(np.clip(width + rng.choice((-1, 1)), 1, emission_slots))
    if rng.random() < iface_rate:
        gain = float(gain * np.exp(rng.normal(0.0, 0.1)))

    return g.with_params(OperationalGenes(propagation_steps=steps, move_prob=move)).with_interface(
        InterfaceGenes(emission_width=width, emission_gain=gain, receptor_mask=tuple(mask))
    )


def crossover(a: Genome, b: Genome, rng: np.random.Generator) -> Genome:
    """Random crossover keyed by (src, dst): shared edges take a weight from
    either parent, disjoint edges are inherited with probability one half,
    interface and param genes are taken per field from a random parent."""
    wa = a.weight_map()
    wb = b.weight_map()
    keys_a = set(wa)
    keys_b = set(wb)
    node_count = max(a.node_count, b.node_count)

    edges: list[tuple[int, int, float]] = []
    for key in sorted(keys_a & keys_b):
        w = wa[key] if rng.random() < 0.5 else wb[key]
        edges.append((key[0], key[1], w))
    for key in sorted(keys_a - keys_b):
        if rng.random() < 0.5:
            edges.append((key[0], key[1], wa[key]))
    for key in sorted(keys_b - keys_a):
        if rng.random() < 0.5:
            edges.append((key[0], key[1], wb[key]))

    pick = lambda x, y: x if rng.random() < 0.5 else y  # noqa: E731
    interface = InterfaceGenes(
        emission_width=pick(a.interface.emission_width, b.interface.emission_width),
        emission_gain=pick(a.interface.emission_gain, b.interface.emission_gain),
        receptor_mask=pick(a.interface.receptor_mask, b.interface.receptor_mask),
    )
    params = OperationalGenes(
        propagation_steps=pick(a.params.propagation_steps, b.params.propagation_steps),
        move_prob=pick(a.params.move_prob, b.params.move_prob),
    )
    return Genome(
        node_count=node_count,
        conn_src=np.array([e[0] for e in edges], dtype=np.int64),
        conn_dst=np.array([e[1] for e in edges], dtype=np.int64),
        conn_weight=np.array([e[2] for e in edges], dtype=np.float64),
        interface=interface,
        params=params,
    )


def mutate_all(
    g: Genome,
    r: MutationRates,
    rng: np.random.Generator,
    *,
    sensory_width: int,
    emission_slots: int,
    node_max: int = NODE_MAX,
    strict_blind_deletion: bool = False,
) -> Genome:
    """The full mutation pass applied to every offspring genome."""
    g = mutate_weights(g, r, rng)
    g = mutate_topology(
        g,
        r,
        rng,
        sensory_width=sensory_width,
        emission_slots=emission_slots,
        node_max=node_max,
        strict_blind_deletion=strict_blind_deletion,
    )
    return mutate_params_and_interface(g, r, rng, emission_slots=emission_slots)


def recombine(
    a: Genome,
    b: Genome,
    r: MutationRates,
    rng: np.random.Generator,
    *,
    sensory_width: int,
    emission_slots: int,
    node_max: int = NODE_MAX,
    strict_blind_deletion: bool = False,
) -> Genome:
    """Sexual reproduction: crossover followed by independent mutations."""
    child = crossover(a, b, rng)
    return mutate_all(
        child,
        r,
        rng,
        sensory_width=sensory_width,
        emission_slots=emission_slots,
        node_max=node_max,
        strict_blind_deletion=strict_blind_deletion,
    )
