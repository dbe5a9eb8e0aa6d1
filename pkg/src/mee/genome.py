"""Heritable specification of a unit.

A genome is everything mutation and recombination act on: the internal
recurrent topology and weights, the boundary (interface) genes that shape
what the unit absorbs and emits, and a few operational parameters.
Genomes are immutable after creation and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterator

import numpy as np

# Structural defaults. These are engine constants, not physics: they shape
# the genotype space itself.
NODE_MIN = 5
NODE_MAX = 50
SIGMA_INIT = 0.1
W_SCALE = 1.0
PROPAGATION_CAP = 4


class GenomeError(ValueError):
    """Raised when a genome violates its structural invariants."""


@dataclass(frozen=True, eq=False)
class InterfaceGenes:
    """Boundary-format genes: what the unit absorbs and how it emits.

    These mutate far more slowly than internal weights (interface
    viscosity), so the communication formats between units stay stable on
    the timescale of internal adaptation.
    """

    emission_width: int
    emission_gain: float
    receptor_mask: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.emission_width < 1:
            raise GenomeError(f"emission_width must be >= 1, got {self.emission_width}")
        if not self.emission_gain > 0:
            raise GenomeError(f"emission_gain must be > 0, got {self.emission_gain}")
        if not any(self.receptor_mask):
            raise GenomeError("receptor_mask needs at least one set bit")
        if any(b not in (0, 1) for b in self.receptor_mask):
            raise GenomeError("receptor_mask entries must be 0 or 1")

    def mask_array(self) -> np.ndarray:
        return np.asarray(self.receptor_mask, dtype=np.float64)


@dataclass(frozen=True, eq=False)
class OperationalGenes:
    """Evolvable run-time parameters: processing depth and migration propensity."""

    propagation_steps: int
    move_prob: float

    def __post_init__(self) -> None:
        if not 1 <= self.propagation_steps <= PROPAGATION_CAP:
            raise GenomeError(f"propagation_steps out of [1, {PROPAGATION_CAP}]")
        if not 0.0 <= self.move_prob <= 1.0:
            raise GenomeError(f"move_prob out of [0, 1]: {self.move_prob}")


@dataclass(frozen=True, eq=False)
class Genome:
    """Internal network plus boundary genes.

    Connections are stored as three parallel arrays (directed edges, self
    loops permitted, no duplicate (src, dst) pairs). The arrays are marked
    read-only; derive modified genomes with :meth:`with_weights` or by
    constructing a new instance.
    """

    node_count: int
    conn_src: np.ndarray
    conn_dst: np.ndarray
    conn_weight: np.ndarray
    interface: InterfaceGenes
    params: OperationalGenes

    def __post_init__(self) -> None:
        src = np.asarray(self.conn_src, dtype=np.int64)
        dst = np.asarray(self.conn_dst, dtype=np.int64)
        w = np.asarray(self.conn_weight, dtype=np.float64)
        if not (len(src) == len(dst) == len(w)):
            raise GenomeError("connection arrays must have equal length")
        if len(src):
            # Canonical edge order: serialization and hashing must not depend
            # on the history of mutations that produced the genome.
            order = np.lexsort((dst, src))
            src = src[order]
            dst = dst[order]
            w = w[order]
        object.__setattr__(self, "conn_src", src)
        object.__setattr__(self, "conn_dst", dst)
        object.__setattr__(self, "conn_weight", w)
        if self.node_count < 1:
            raise GenomeError("node_count must be positive")
        if len(src) and (src.min() < 0 or src.max() >= self.node_count):
            raise GenomeError("connection src index out of range")
        if len(dst) and (dst.min() < 0 or dst.max() >= self.node_count):
            raise GenomeError("connection dst index out of range")
        keys = set(zip(src.tolist(), dst.tolist()))
        if len(keys) != len(src):
            raise GenomeError("duplicate (src, dst) connection")
        for arr in (src, dst, w):
            arr.flags.writeable = False

    # -- structure helpers ------------------------------------------------

    @property
    def n_connections(self) -> int:
        return len(self.conn_src)

    def edge_keys(self) -> set[tuple[int, int]]:
        return set(zip(self.conn_src.tolist(), self.conn_dst.tolist()))

    def edges(self) -> Iterator[tuple[int, int, float]]:
        yield from zip(self.conn_src.tolist(), self.conn_dst.tolist(), self.conn_weight.tolist())

    def weight_map(self) -> dict[tuple[int, int], float]:
        return {(s, d): w for s, d, w in self.edges()}

    def with_weights(self, weights: np.ndarray) -> "Genome":
        """Same topology and genes, different weight vector.

        Skips invariant re-validation: the topology is untouched, so the
        checks cannot fail and this runs once per unit per tick.
        """
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != self.conn_weight.shape:
            raise GenomeError("weight vector shape mismatch")
        if w.flags.writeable:
            w = w.copy()
            w.flags.writeable = False
        g = object.__new__(Genome)
        object.__setattr__(g, "node_count", self.node_count)
        object.__setattr__(g, "conn_src", self.conn_src)
        object.__setattr__(g, "conn_dst", self.conn_dst)
        object.__setattr__(g, "conn_weight", w)
        object.__setattr__(g, "interface", self.interface)
        object.__setattr__(g, "params", self.params)
        return g

    def with_interface(self, interface: InterfaceGenes) -> "Genome":
        return replace(self, interface=interface)

    def with_params(self, params: OperationalGenes) -> "Genome":
        return replace(self, params=params)

    # -- serialization ----------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "node_count": self.node_count,
            "connections": [[int(s), int(d), float(w)] for s, d, w in self.edges()],
            "interface": {
                "emission_width": self.interface.emission_width,
                "emission_gain": self.interface.emission_gain,
                "receptor_mask": list(self.interface.receptor_mask),
            },
            "params": {
                "propagation_steps": self.params.propagation_steps,
                "move_prob": self.params.move_prob,
            },
        }

    @staticmethod
    def from_json_dict(data: dict) -> "Genome":
        conns = data["connections"]
        return Genome(
            node_count=int(data["node_count"]),
            conn_src=np.array([c[0] for c in conns], dtype=np.int64),
            conn_dst=np.array([c[1] for c in conns], dtype=np.int64),
            conn_weight=np.array([c[2] for c in conns], dtype=np.float64),
            interface=InterfaceGenes(
                emission_width=int(data["interface"]["emission_width"]),
                emission_gain=float(data["interface"]["emission_gain"]),
                receptor_mask=tuple(int(b) for b in data["interface"]["receptor_mask"]),
            ),
            params=OperationalGenes(
                propagation_steps=int(data["params"]["propagation_steps"]),
                move_prob=float(data["params"]["move_prob"]),
            ),
        )


# -- node role mapping -----------------------------------------------------
#
# Sensory channel c injects into node c mod n. Logical readout slot o
# (prediction slots first, then emission slots) reads node (n-1) - (o mod n),
# counting back from the last index. For small networks multiple channels
# share a node; that is a real representational bottleneck the economics
# can price, not an error.


def input_node(channel: int, node_count: int) -> int:
    return channel % node_count


def readout_node(slot: int, node_count: int) -> int:
    return (node_count - 1) - (slot % node_count)


def validate_genome(g: Genome, node_min: int = NODE_MIN, node_max: int = NODE_MAX) -> None:
    """Full invariant check, including configured node bounds."""
    if not node_min <= g.node_count <= node_max:
        raise GenomeError(f"node_count {g.node_count} outside [{node_min}, {node_max}]")
    # Structural invariants re-checked on construction; touch them here so a
    # deserialized genome gets the same scrutiny.
    Genome(
        node_count=g.node_count,
        conn_src=g.conn_src.copy(),
        conn_dst=g.conn_dst.copy(),
        conn_weight=g.conn_weight.copy(),
        interface=g.interface,
        params=g.params,
    )


def new_uniform_genome(
    node_count: int,
    rng: np.random.Generator,
    *,
    sensory_width: int,
    emission_slots: int,
    sigma_init: float = SIGMA_INIT,
    propagation_steps: int = 1,
    move_prob: float = 0.1,
) -> Genome:
    """Founder genome: identical scaffold across the population, random weights.

    The scaffold wires each sensory channel's input node to the readout node
    of the matching prediction slot, wires the first channels to the emission
    readouts, and adds a self loop on every node. All founders share this
    topology and the interface genes; only the weight draws differ between
    rng streams.
    """
    if not NODE_MIN <= node_count <= NODE_MAX:
        raise GenomeError(f"founder node_count {node_count} outside [{NODE_MIN}, {NODE_MAX}]")
    n = node_count
    keys: list[tuple[int, int]] = []
    seen: set[tuple[int, int]] = set()

    def add(src: int, dst: int) -> None:
        key = (src, dst)
        if key not in seen:
            seen.add(key)
            keys.append(key)

    for c in range(sensory_width):
        add(input_node(c, n), readout_node(c, n))
    for e in range(emission_slots):
        add(input_node(e, n), readout_node(sensory_width + e, n))
    for j in range(n):
        add(j, j)

    keys.sort()
    weights = rng.normal(0.0, sigma_init, size=len(keys))
    return Genome(
        node_count=n,
        conn_src=np.array([k[0] for k in keys], dtype=np.int64),
        conn_dst=np.array([k[1] for k in keys], dtype=np.int64),
        conn_weight=weights,
        interface=InterfaceGenes(
            emission_width=emission_slots,
            emission_gain=1.0,
            receptor_mask=tuple([1] * sensory_width),
        ),
        params=OperationalGenes(propagation_steps=propagation_steps, move_prob=move_prob),
    )


def genome_distance(a: Genome, b: Genome, *, w_scale: float = W_SCALE, node_max: int = NODE_MAX) -> float:
    """Structural distance between two genomes.

    Jaccard distance over (src, dst) edge sets, plus mean absolute weight
    difference over shared edges (normalized by w_scale), plus the node
    count gap normalized by the configured maximum. Symmetric, zero iff the
    topologies are identical and the weights equal.
    """
    keys_a = a.edge_keys()
    keys_b = b.edge_keys()
    union = keys_a | keys_b
    if union:
        jaccard = 1.0 - len(keys_a & keys_b) / len(union)
    else:
        jaccard = 0.0

    shared = keys_a & keys_b
    if shared:
        wa = a.weight_map()
        wb = b.weight_map()
        mean_dw = sum(abs(wa[k] - wb[k]) for k in shared) / len(shared)
        weight_term = mean_dw / w_scale
    else:
        weight_term = 0.0

    node_term = abs(a.node_count - b.node_count) / node_max
    return jaccard + weight_term + node_term
