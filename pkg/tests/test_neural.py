"""Forward-cycle behavior: activations, readouts, costs, corruption."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mee.genome import new_uniform_genome
from mee.neural import forward_cycle, fresh_state
from mee.rngs import substream

from conftest import make_genome

NO_DISCRETE = np.zeros(4, dtype=bool)


def cycle(genome, sensory, state=None, tau=0.05, discrete=None, slots=1):
    if state is None:
        state = fresh_state(genome, len(sensory))
    if discrete is None:
        discrete = np.zeros(len(sensory), dtype=bool)
    return forward_cycle(
        genome, state, np.asarray(sensory, dtype=np.float64),
        tau=tau, discrete_mask=discrete, emission_slots=slots,
    )


class TestForward:
    def test_zero_network_is_silent_and_midrange(self):
        g = make_genome([(0, 1, 0.0), (1, 2, 0.0)])
        state, out = cycle(g, [0.9, 0.3, 0.0, 1.0])
        assert np.all(state.activations == 0.0)
        assert out.v_repr == 0
        assert np.all(out.prediction_next == 0.5)
        assert out.k_cost == 0.0

    def test_k_cost_is_connections_times_steps(self):
        edges = [(i % 5, (i * 2 + 1) % 5, 0.3) for i in range(10)]
        edges = list({(s, d): (s, d, w) for s, d, w in edges}.values())
        # pad to exactly 10 unique nonzero edges
        extra = [(s, d, 0.2) for s in range(5) for d in range(5)
                 if (s, d) not in {(a, b) for a, b, _ in edges}]
        edges = (edges + extra)[:10]
        g = make_genome(edges, steps=2)
        _, out = cycle(g, [0.0, 0.0, 0.0, 0.0])
        assert out.k_cost == 20.0

    def test_self_loop_hand_trace(self):
        # One self loop of weight 2.0, unit input 1.0, one step:
        # preload a0 = 1.0, then ReLU(2.0 * 1.0) = 2.0, above tau = 0.01.
        g = make_genome([(0, 0, 2.0)], mask_width=1)
        state, out = cycle(g, [1.0], tau=0.01)
        assert state.activations[0] == pytest.approx(2.0, rel=1e-15)
        assert out.v_repr == 1

    def test_activity_threshold_is_strict(self):
        # A node resting exactly at tau is dormant: active means a > tau.
        g = make_genome([(0, 0, 1.0)], mask_width=1)
        tau = 0.25
        _, out = cycle(g, [tau], tau=tau)
        assert out.v_repr == 0
        _, out = cycle(g, [tau + 1e-9], tau=tau)
        assert out.v_repr == 1

    def test_determinism(self):
        g = make_genome([(0, 1, 0.7), (1, 1, 0.4), (1, 4, -0.6)], steps=3)
        s1, o1 = cycle(g, [0.3, 0.8, 0.1, 0.9])
        s2, o2 = cycle(g, [0.3, 0.8, 0.1, 0.9])
        assert np.array_equal(s1.activations, s2.activations)
        assert np.array_equal(o1.prediction_next, o2.prediction_next)

    def test_k_cost_ignores_sensory_values(self, rng):
        g = make_genome([(0, 1, 0.7), (1, 2, -0.2), (2, 2, 0.5)])
        costs = {cycle(g, rng.random(4))[1].k_cost for _ in range(10)}
        assert costs == {3.0}

    def test_state_carries_between_cycles(self):
        g = make_genome([(0, 0, 1.0)], mask_width=1)
        state, _ = cycle(g, [1.0])
        state2, _ = cycle(g, [1.0], state=state)
        # a = ReLU(1.0 * (1.0 + 1.0)) on the second cycle
        assert state2.activations[0] == pytest.approx(2.0, rel=1e-15)


class TestReadouts:
    def test_discrete_predictions_are_clamped(self):
        g = make_genome([(0, 4, 50.0)], mask_width=1)
        _, out = cycle(g, [1.0], discrete=np.array([True]))
        from mee.neural import EPS_P

        assert out.prediction_next[0] == pytest.approx(1.0 - EPS_P)

    def test_negative_drive_predicts_below_half(self):
        g = make_genome([(0, 4, -2.0)], mask_width=1)
        _, out = cycle(g, [1.0])
        assert out.prediction_next[0] < 0.5

    def test_emission_scaling_and_width(self):
        # Readout node for emission slot 0 with width 1 sensory is node 3.
        g = make_genome([(0, 3, 1.0)], mask_width=1, emission_width=1, emission_gain=2.5)
        _, out = cycle(g, [1.0], slots=3)
        assert out.emission[0] == pytest.approx(2.5, rel=1e-12)
        assert out.emission[1] == 0.0 and out.emission[2] == 0.0
        assert np.all(out.emission >= 0.0)


class TestCorruption:
    def test_overflow_marks_corrupt_and_resets(self):
        g = make_genome([(0, 0, 1e200)], mask_width=1)
        state, out = cycle(g, [1e200])
        assert out.corrupt
        assert out.v_repr == 0
        assert np.all(out.emission == 0.0)
        assert np.all(state.activations == 0.0)
        assert np.all(out.prediction_next == 0.5)


@settings(max_examples=80, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(5, 30), steps=st.integers(1, 4))
def test_activations_never_negative(seed, n, steps):
    rng = substream(seed, 0)
    g = new_uniform_genome(n, rng, sensory_width=12, emission_slots=2, propagation_steps=steps)
    state = fresh_state(g, 12)
    for _ in range(5):
        sensory = rng.random(12)
        state, out = forward_cycle(
            g, state, sensory, tau=0.05, discrete_mask=np.zeros(12, dtype=bool), emission_slots=2
        )
        assert np.all(state.activations >= 0.0)
        assert out.v_repr <= n
