"""Three-factor update rule: sign laws, decay, clamps, lock-in."""

import numpy as np
import pytest

from mee.neural import NetState
from mee.physics import PhysicsParams
from mee.plasticity import hebbian_update, lockin_agreement

from conftest import make_genome


def params(**over):
    base = dict(alpha=1.0, beta=0.1, gamma=1.0, tau=0.05, eta=0.1, lambda_decay=0.0,
                e_start=100.0, repro_threshold=200.0)
    base.update(over)
    return PhysicsParams(**base)


def state_with(acts, width=4):
    acts = np.asarray(acts, dtype=np.float64)
    return NetState(activations=acts, last_prediction=np.full(width, 0.5))


class TestRule:
    def test_zero_surplus_zero_decay_changes_nothing(self):
        g = make_genome([(0, 1, 0.4), (1, 2, -0.7)])
        g2, resets = hebbian_update(g, state_with([1.0, 1.0, 1.0, 0.0, 0.0]), 0.0, params())
        assert np.array_equal(g2.conn_weight, g.conn_weight)
        assert resets == 0

    def test_positive_reinforcement_worked_example(self):
        # eta 0.1, surplus 2, x = y = 1: dw = +0.2 exactly.
        g = make_genome([(0, 1, 0.5)])
        g2, _ = hebbian_update(g, state_with([1.0, 1.0, 0.0, 0.0, 0.0]), 2.0, params())
        assert g2.conn_weight[0] == pytest.approx(0.7, rel=1e-15)

    def test_negative_reinforcement_weakens_active_pathways(self):
        g = make_genome([(0, 1, 0.5)])
        g2, _ = hebbian_update(g, state_with([1.0, 1.0, 0.0, 0.0, 0.0]), -2.0, params())
        assert g2.conn_weight[0] == pytest.approx(0.3, rel=1e-15)

    def test_weights_can_cross_zero_and_turn_inhibitory(self):
        g = make_genome([(0, 1, 0.1)])
        g2, _ = hebbian_update(g, state_with([1.0, 1.0, 0.0, 0.0, 0.0]), -5.0, params())
        assert g2.conn_weight[0] < 0.0

    def test_sign_law_randomized(self, rng):
        # 1e5 randomized cases: with zero decay, sign(dw) == sign(surplus)
        # wherever x*y > 0, and dw == 0 wherever x*y == 0.
        p = params()
        cases = 0
        while cases < 100_000:
            n = 50
            pairs = rng.choice(n * n, size=2000, replace=False)
            edges = [(int(k // n), int(k % n), float(w)) for k, w in zip(pairs, rng.normal(0, 1, 2000))]
            g = make_genome(edges, node_count=n)
            acts = np.where(rng.random(n) < 0.3, 0.0, rng.random(n) * 2.0)
            surplus = float(rng.normal(0, 2))
            g2, _ = hebbian_update(g, state_with(acts), surplus, p)
            dw = g2.conn_weight - g.conn_weight
            xy = acts[g.conn_src] * acts[g.conn_dst]
            silent = xy == 0.0
            assert np.all(dw[silent] == 0.0)
            live = ~silent & (np.abs(g.conn_weight) < p.w_cap - 1.0)
            if surplus > 0:
                assert np.all(dw[live] > 0.0)
            elif surplus < 0:
                assert np.all(dw[live] < 0.0)
            cases += len(edges)

    def test_decay_is_a_restoring_force(self, rng):
        # Zero surplus, positive decay: every nonzero weight moves toward 0.
        p = params(lambda_decay=0.01)
        for _ in range(50):
            w = rng.normal(0, 2, 30)
            w[w == 0.0] = 0.5
            edges = [(i % 5, (i * 7 + 1) % 5, float(wi)) for i, wi in enumerate(w)]
            edges = list({(s, d): (s, d, wv) for s, d, wv in edges}.values())
            g = make_genome(edges)
            g2, _ = hebbian_update(g, state_with(rng.random(5)), 0.0, p)
            assert np.all(np.abs(g2.conn_weight) < np.abs(g.conn_weight))

    def test_clamped_at_weight_cap(self):
        p = params(eta=10.0, w_cap=10.0)
        g = make_genome([(0, 1, 9.5)])
        g2, _ = hebbian_update(g, state_with([2.0, 2.0, 0.0, 0.0, 0.0]), 10.0, p)
        assert g2.conn_weight[0] == 10.0
        g3, _ = hebbian_update(g, state_with([2.0, 2.0, 0.0, 0.0, 0.0]), -10.0, p)
        assert g3.conn_weight[0] == -10.0

    def test_non_finite_result_resets_to_zero_and_counts(self):
        g = make_genome([(0, 1, 1.0), (1, 2, 1.0)])
        huge = state_with([1e200, 1e200, 0.0, 0.0, 0.0])
        g2, resets = hebbian_update(g, huge, 1e200, params())
        # eta * surplus * x overflows to inf before the factors of the
        # second edge can zero it (inf * 0 is nan): both weights reset.
        assert resets == 2
        assert np.all(g2.conn_weight == 0.0)
        assert np.all(np.isfinite(g2.conn_weight))


class TestLockin:
    def test_early_dominant_pathway_stays_dominant(self):
        # Smoke-scale version of the urn property; the full thousand
        # replicates run in the acceptance suite.
        assert lockin_agreement(0, replicates=60, ticks=2000) >= 0.8
