"""Blind variation operators: rates, structure changes, crossover."""

import inspect

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mee.evolution import (
    MutationRates,
    crossover,
    mutate_all,
    mutate_params_and_interface,
    mutate_topology,
    mutate_weights,
    recombine,
)
from mee.genome import new_uniform_genome, readout_node, validate_genome
from mee.rngs import substream

from conftest import make_genome

WIDTH = 10
SLOTS = 2


def founder(node_count=8, seed=0):
    return new_uniform_genome(node_count, substream(seed, 0), sensory_width=WIDTH, emission_slots=SLOTS)


def rates(**over):
    base = dict(weight_rate=0.01, weight_sigma=0.05, topo_rate=0.05,
                param_rate=0.05, interface_factor=0.01, recomb_prob=0.25)
    base.update(over)
    return MutationRates(**base)


def topo_kw(**over):
    kw = dict(sensory_width=WIDTH, emission_slots=SLOTS)
    kw.update(over)
    return kw


class TestWeightMutation:
    def test_zero_rate_is_identity(self, rng):
        g = founder()
        assert mutate_weights(g, rates(weight_rate=0.0), rng) is g

    def test_zero_sigma_changes_nothing(self, rng):
        g = founder()
        g2 = mutate_weights(g, rates(weight_rate=1.0, weight_sigma=1e-300), rng)
        assert np.allclose(g2.conn_weight, g.conn_weight, atol=1e-250)

    def test_expected_hit_count(self):
        # 100 connections at rate 0.01: the empirical mean number of
        # perturbed weights over many trials sits within [0.97, 1.03].
        pairs = [(i // 10, i % 10, 0.5) for i in range(100)]
        g = make_genome(pairs, node_count=10)
        r = rates(weight_rate=0.01, weight_sigma=0.5)
        rng = substream(42, 1)
        trials = 100_000
        hits = 0
        for _ in range(trials):
            hits += int((rng.random(100) < r.weight_rate).sum())
        assert 0.97 <= hits / trials <= 1.03

    def test_topology_untouched(self, rng):
        g = founder()
        g2 = mutate_weights(g, rates(weight_rate=1.0), rng)
        assert g2.edge_keys() == g.edge_keys()
        assert g2.node_count == g.node_count


class TestTopologyMutation:
    def test_zero_rate_is_identity(self, rng):
        g = founder()
        assert mutate_topology(g, rates(topo_rate=0.0), rng, **topo_kw()) is g

    def test_outcomes_preserve_invariants(self):
        g = founder()
        e0 = g.n_connections
        n0 = g.node_count
        saw = set()
        for i in range(300):
            rng = substream(7, i)
            g2 = mutate_topology(g, rates(topo_rate=1.0), rng, **topo_kw())
            validate_genome(g2)
            if g2.node_count == n0 + 1:
                saw.add("split")
                assert g2.n_connections == e0 + 1  # one edge replaced by two
            elif g2.n_connections == e0 + 1:
                saw.add("add")
            elif g2.n_connections == e0 - 1:
                saw.add("delete")
        assert saw == {"split", "add", "delete"}

    def test_split_keeps_old_weight_downstream(self):
        g = make_genome([(0, 1, 0.77)], node_count=5)
        for i in range(50):
            rng = substream(11, i)
            g2 = mutate_topology(g, rates(topo_rate=1.0), rng, **topo_kw())
            if g2.node_count == 6:
                weights = g2.weight_map()
                assert weights[(0, 5)] == 1.0
                assert weights[(5, 1)] == 0.77
                return
        pytest.fail("split never sampled")

    def test_delete_never_strands_the_readouts(self):
        # One edge into a readout node: deleting it would leave a genome
        # that cannot emit or predict, so the option is skipped.
        readout = readout_node(0, 5)
        g = make_genome([(0, readout, 0.5)], node_count=5)
        for i in range(200):
            rng = substream(13, i)
            g2 = mutate_topology(g, rates(topo_rate=1.0), rng, **topo_kw())
            feeds = any(dst == readout for _, dst, _ in g2.edges())
            assert feeds

    def test_strict_blind_deletion_can_strand(self):
        readout = readout_node(0, 5)
        g = make_genome([(0, readout, 0.5)], node_count=5)
        stranded = False
        for i in range(300):
            rng = substream(17, i)
            g2 = mutate_topology(
                g, rates(topo_rate=1.0), rng, **topo_kw(strict_blind_deletion=True)
            )
            if g2.n_connections == 0:
                stranded = True
                break
        assert stranded

    def test_node_cap_blocks_split(self):
        g = founder(node_count=8)
        for i in range(100):
            rng = substream(19, i)
            g2 = mutate_topology(g, rates(topo_rate=1.0), rng, **topo_kw(node_max=8))
            assert g2.node_count == 8


class TestParamsAndInterface:
    def test_zero_interface_factor_freezes_boundary_genes(self):
        g = founder()
        for i in range(300):
            rng = substream(23, i)
            g2 = mutate_params_and_interface(
                g, rates(param_rate=1.0, interface_factor=0.0), rng, emission_slots=SLOTS
            )
            assert g2.interface.receptor_mask == g.interface.receptor_mask
            assert g2.interface.emission_width == g.interface.emission_width
            assert g2.interface.emission_gain == g.interface.emission_gain

    def test_interface_mutation_frequency_is_the_product_of_rates(self):
        # Boundary genes mutate at param_rate * interface_factor; at the
        # default rates that is 5e-4 per reproduction event.
        r = rates(param_rate=0.05, interface_factor=0.01)
        rng = substream(29, 0)
        trials = 1_000_000
        hits = int((rng.random(trials) < r.param_rate * r.interface_factor).sum())
        assert 350 <= hits <= 650  # 500 expected, ~6.7 sigma band

        g = founder()
        changed = 0
        operator_trials = 30_000
        for i in range(operator_trials):
            op_rng = substream(31, i)
            g2 = mutate_params_and_interface(g, r, op_rng, emission_slots=SLOTS)
            if (
                g2.interface.receptor_mask != g.interface.receptor_mask
                or g2.interface.emission_width != g.interface.emission_width
               or g2.interface.emission_gain != g.interface.emission_gain
            ):
                changed += 1
        # Three boundary genes, each at 5e-4: about 45 expected changes.
        assert 15 <= changed <= 90

    def test_mask_never_empties(self):
        mask = tuple([1] + [0] * (WIDTH - 1))
        g = founder().with_interface(
            founder().interface.__class__(emission_width=1, emission_gain=1.0, receptor_mask=mask)
        )
        for i in range(4000):
            rng = substream(37, i)
            g2 = mutate_params_and_interface(
                g, rates(param_rate=1.0, interface_factor=1.0), rng, emission_slots=SLOTS
            )
            assert any(g2.interface.receptor_mask)

    def test_propagation_steps_stay_in_bounds(self):
        g = founder()
        for i in range(200):
            rng = substream(41, i)
            g2 = mutate_params_and_interface(
                g, rates(param_rate=1.0), rng, emission_slots=SLOTS
            )
            assert 1 <= g2.params.propagation_steps <= 4
            assert 0.0 <= g2.params.move_prob <= 1.0


class TestRecombination:
    def test_identical_parents_zero_rates_reproduce_exactly(self, rng):
        g = founder()
        child = recombine(
            g, g,
            rates(weight_rate=0.0, topo_rate=0.0, param_rate=0.0),
            rng, sensory_width=WIDTH, emission_slots=SLOTS,
        )
        assert child.node_count == g.node_count
        assert child.edge_keys() == g.edge_keys()
        assert np.array_equal(child.conn_weight, g.conn_weight)
        assert child.interface.receptor_mask == g.interface.receptor_mask

    def test_disjoint_parents_expected_child_edges(self):
        a = make_genome([(0, 1, 0.1), (1, 2, 0.2), (2, 3, 0.3), (3, 4, 0.4)])
        b = make_genome([(1, 0, 0.1), (2, 1, 0.2), (3, 2, 0.3), (4, 3, 0.4),
                         (0, 2, 0.5), (1, 3, 0.6)])
        total = 0
        trials = 20_000
        for i in range(trials):
            child = crossover(a, b, substream(43, i))
            total += child.n_connections
        mean = total / trials
        assert 4.92 <= mean <= 5.08  # each of 10 disjoint edges kept w.p. 1/2

    def test_shared_edges_take_a_parent_weight(self):
        a = make_genome([(0, 1, 0.25)])
        b = make_genome([(0, 1, 0.75)])
        seen = set()
        for i in range(100):
            child = crossover(a, b, substream(47, i))
            seen.add(float(child.conn_weight[0]))
        assert seen == {0.25, 0.75}

    @settings(max_examples=40, deadline=None)
    @given(sa=st.integers(0, 5000), sb=st.integers(0, 5000), na=st.integers(5, 20), nb=st.integers(5, 20))
    def test_children_always_satisfy_invariants(self, sa, sb, na, nb):
        a = new_uniform_genome(na, substream(sa, 0), sensory_width=WIDTH, emission_slots=SLOTS)
        b = new_uniform_genome(nb, substream(sb, 0), sensory_width=WIDTH, emission_slots=SLOTS)
        child = recombine(a, b, rates(), substream(sa + sb, 1),
                          sensory_width=WIDTH, emission_slots=SLOTS)
        validate_genome(child)
        # Base node count comes from the larger parent; the mutation pass
        # may have split one edge through a fresh node.
        assert max(na, nb) <= child.node_count <= max(na, nb) + 1


def test_operators_cannot_see_the_environment():
    # Blindness by interface: no mutation operator takes energy, error, or
    # stream arguments, so variation is structurally undirected.
    forbidden = {"energy", "error", "stream", "fitness", "gain"}
    for op in (mutate_weights, mutate_topology, mutate_params_and_interface, crossover, mutate_all):
        names = set(inspect.signature(op).parameters)
        assert not (names & forbidden)
