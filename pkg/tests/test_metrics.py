"""Offline measurement operators over synthetic profiles and ledgers."""

import math

import pytest

from mee.genome import new_uniform_genome
from mee.metrics import (
    UnitEnergyProfile,
    assign_trophic_levels,
    build_profiles,
    complexity_series,
    efficiency_series,
    mann_kendall,
    mean_specialization_entropy,
    noise_fraction,
    path_divergence,
    specialization_entropy,
)
from mee.rngs import substream
from mee.streams import StreamKind
from mee.world import UnitTickRecord


def profile(uid=0, gains=None, volumes=None, admits_noise=True):
    return UnitEnergyProfile(
        unit_id=uid, gains=dict(gains or {}), volumes=dict(volumes or {}), admits_noise=admits_noise
    )


def record(tick, uid, gain=1.0, sources=(), volumes=(), error=0.2, v_in=4,
           compute=0.1, maintenance=1.0):
    return UnitTickRecord(
        tick=tick, unit_id=uid, e_before=10.0, gain=gain, compute_cost=compute,
        maintenance=maintenance, e_after=10.0 + gain - compute - maintenance,
        surplus=gain - compute, v_in=v_in, v_volume=float(v_in), v_repr=2,
        error=error, corrupt=False, sources=tuple(sources), volumes=tuple(volumes),
    )


class TestSpecializationEntropy:
    def test_single_source_is_zero(self):
        assert specialization_entropy(profile(gains={"text": 3.0})) == 0.0

    def test_uniform_four_streams_is_two_bits(self):
        gains = {k.value: 1.0 for k in StreamKind}
        assert specialization_entropy(profile(gains=gains)) == pytest.approx(2.0, rel=1e-12)

    def test_half_half_is_one_bit(self):
        gains = {"numeric": 0.5, "text": 0.5}
        assert specialization_entropy(profile(gains=gains)) == pytest.approx(1.0, rel=1e-12)

    def test_emission_forms_a_fifth_bucket(self):
        gains = {k.value: 1.0 for k in StreamKind}
        gains["unit:9"] = 1.0
        h = specialization_entropy(profile(gains=gains))
        assert h == pytest.approx(math.log2(5), rel=1e-12)

    def test_zero_gain_is_undefined_and_excluded(self):
        with pytest.raises(ValueError):
            specialization_entropy(profile(gains={}))
        profiles = {0: profile(0, {"text": 1.0}), 1: profile(1, {})}
        assert mean_specialization_entropy(profiles) == 0.0

    def test_bounds_on_random_profiles(self, rng):
        for _ in range(300):
            keys = ["numeric", "text", "noise", "temporal", "unit:3", "unit:4"]
            gains = {k: float(g) for k, g in zip(keys, rng.random(6)) if g > 0}
            h = specialization_entropy(profile(gains=gains))
            assert 0.0 <= h <= math.log2(5) + 1e-12


class TestNoiseFraction:
    def test_all_noise_heavy(self):
        profiles = {
            i: profile(i, volumes={"noise": 3.0, "text": 1.0}) for i in range(4)
        }
        assert noise_fraction(profiles) == 1.0

    def test_masks_without_noise_bits_do_not_count(self):
        profiles = {
            i: profile(i, volumes={"noise": 3.0}, admits_noise=False) for i in range(4)
        }
        assert noise_fraction(profiles) == 0.0

    def test_quarter_threshold(self):
        profiles = {
            0: profile(0, volumes={"noise": 0.26, "text": 0.74}),
            1: profile(1, volumes={"noise": 0.24, "text": 0.76}),
        }
        assert noise_fraction(profiles) == 0.5

    def test_empty_population_rejected(self):
        with pytest.raises(ValueError):
            noise_fraction({})


class TestTrophic:
    def test_stream_fed_population_is_level_one(self):
        profiles = {i: profile(i, gains={"text": 2.0}) for i in range(5)}
        levels, report = assign_trophic_levels(profiles)
        assert all(a.level == 1 for a in levels.values())
        assert report["histogram"] == {1: 5}

    def test_majority_consumer_sits_one_level_up(self):
        profiles = {
            1: profile(1, gains={"text": 2.0}),
            2: profile(2, gains={"unit:1": 0.6, "text": 0.4}),
        }
        levels, report = assign_trophic_levels(profiles)
        assert levels[1].level == 1
        assert levels[2].level == 2
        assert report["flow"]["1->2"] == pytest.approx(0.6)

    def test_chain_builds_levels(self):
        profiles = {
            1: profile(1, gains={"text": 1.0}),
            2: profile(2, gains={"unit:1": 1.0}),
            3: profile(3, gains={"unit:2": 1.0}),
        }
        levels, _ = assign_trophic_levels(profiles)
        assert [levels[i].level for i in (1, 2, 3)] == [1, 2, 3]

    def test_mutual_feeders_collapse_to_level_one(self):
        profiles = {
            1: profile(1, gains={"unit:2": 1.0}),
            2: profile(2, gains={"unit:1": 1.0}),
        }
        levels, _ = assign_trophic_levels(profiles)
        assert levels[1].level == 1
        assert levels[2].level == 1

    def test_adversarial_cycles_terminate(self, rng):
        for trial in range(30):
            n = 40
            profiles = {}
            for uid in range(n):
                if rng.random() < 0.3:
                    profiles[uid] = profile(uid, gains={"text": 1.0})
                else:
                    target = int(rng.integers(n))
                    profiles[uid] = profile(uid, gains={f"unit:{target}": 1.0})
            levels, report = assign_trophic_levels(profiles)
            assert all(1 <= a.level <= 8 for a in levels.values())
            assert sum(report["histogram"].values()) == n


class TestPathDivergence:
    def pops(self, seed, n=12):
        return {
            i: new_uniform_genome(8, substream(seed, i), sensory_width=10, emission_slots=2)
            for i in range(n)
        }

    def test_identical_populations_have_equal_inter_and_intra(self):
        a = self.pops(1)
        b = self.pops(1)
        inter, intra = path_divergence(a, b)
        assert inter == pytest.approx(intra, rel=1e-12)

    def test_within_run_clones_differ_across_runs(self):
        g1 = new_uniform_genome(8, substream(1, 0), sensory_width=10, emission_slots=2)
        g2 = new_uniform_genome(8, substream(2, 0), sensory_width=10, emission_slots=2)
        a = {i: g1 for i in range(6)}
        b = {i + 100: g2 for i in range(6)}
        inter, intra = path_divergence(a, b)
        assert intra == 0.0
        assert inter > 0.0

    def test_sampling_is_deterministic(self):
        a = self.pops(3, n=40)
        b = self.pops(4, n=40)
        assert path_divergence(a, b, cap=100) == path_divergence(a, b, cap=100)

    def test_empty_population_rejected(self):
        with pytest.raises(ValueError):
            path_divergence({}, self.pops(1))


def snapshot_with(units):
    return {"state": {"tick": units["tick"], "units": units["units"]}}


class TestComplexity:
    def unit_blob(self, nodes, edges):
        return {"genome": {"node_count": nodes, "connections": [[0, 0, 0.1]] * edges}}

    def test_static_population_has_zero_slope(self):
        snaps = [
            {"state": {"tick": t, "units": [self.unit_blob(6, 10), self.unit_blob(8, 12)]}}
            for t in (0, 100, 200)
        ]
        out = complexity_series(snaps)
        assert out["node_slope"] == pytest.approx(0.0, abs=1e-12)
        assert out["mean_nodes"] == [7.0, 7.0, 7.0]

    def test_every_genome_gaining_a_node_moves_the_mean_by_one(self):
        snaps = [
            {"state": {"tick": 0, "units": [self.unit_blob(6, 10), self.unit_blob(8, 10)]}},
            {"state": {"tick": 100, "units": [self.unit_blob(7, 10), self.unit_blob(9, 10)]}},
        ]
        out = complexity_series(snaps)
        assert out["mean_nodes"][1] - out["mean_nodes"][0] == pytest.approx(1.0)

    def test_requires_two_snapshots(self):
        with pytest.raises(ValueError):
            complexity_series([{"state": {"tick": 0, "units": []}}])


class TestEfficiency:
    BASELINES = {StreamKind.TEXT: 0.7, StreamKind.NOISE: 0.7, StreamKind.NUMERIC: 0.1, StreamKind.TEMPORAL: 0.1}

    def test_matching_baseline_spikes_at_the_guard(self):
        recs = [record(0, 0, error=0.7, volumes=(("text", 4.0),))]
        ticks, series = efficiency_series(recs, self.BASELINES, eps=1e-6)
        assert ticks == [0]
        assert series[0] == pytest.approx((0.1 + 1.0) / 1e-6)

    def test_halved_error_halves_cost_per_reduction(self):
        recs_slow = [record(0, 0, error=0.5, volumes=(("text", 4.0),))]
        recs_fast = [record(0, 0, error=0.3, volumes=(("text", 4.0),))]
        _, slow = efficiency_series(recs_slow, self.BASELINES)
        _, fast = efficiency_series(recs_fast, self.BASELINES)
        # 0.7 - 0.5 = 0.2 vs 0.7 - 0.3 = 0.4: doubling the reduction halves the ratio.
        assert slow[0] == pytest.approx(2 * fast[0], rel=1e-9)

    def test_units_without_stream_volume_are_skipped(self):
        recs = [record(0, 0, volumes=(("emission", 1.0),))]
        ticks, series = efficiency_series(recs, self.BASELINES)
        assert ticks == [] and series == []


class TestMannKendall:
    def test_strictly_increasing_sequence(self):
        out = mann_kendall(list(range(2, 60)))
        # S for a strictly increasing series of length n is n(n-1)/2.
        assert out["s"] == 58 * 57 // 2
        assert out["trend"] == "increasing"
        assert out["p"] < 1e-6

    def test_strictly_decreasing_sequence(self):
        out = mann_kendall(list(range(60, 2, -1)))
        assert out["trend"] == "decreasing"
        assert out["p"] < 1e-6

    def test_constant_sequence_has_no_trend(self):
        out = mann_kendall([5.0] * 50)
        assert out["trend"] == "none"

    def test_reference_value_small_n(self):
        # n = 10 monotone: S = 45, Var = 10*9*25/18 = 125,
        # z = 44 / sqrt(125) = 3.93547..., two-sided p = erfc(z / sqrt 2).
        out = mann_kendall(list(range(10)))
        assert out["s"] == 45
        assert out["z"] == pytest.approx(44 / math.sqrt(125), rel=1e-12)
        assert out["p"] == pytest.approx(math.erfc((44 / math.sqrt(125)) / math.sqrt(2)), rel=1e-9)

    def test_random_walkless_noise_is_trendless(self, rng):
        flagged = 0
        for _ in range(40):
            out = mann_kendall(list(rng.random(60)))
            flagged += out["trend"] != "none"
        assert flagged <= 8  # 5 percent level, generous band


class TestBuildProfiles:
    def test_window_aggregation(self):
        recs = [
            record(5, 1, gain=2.0, sources=(("text", 1.0),), volumes=(("text", 4.0),)),
            record(6, 1, gain=1.0, sources=(("noise", 0.5), ("text", 0.5)), volumes=(("noise", 2.0),)),
            record(99, 1, gain=50.0, sources=(("numeric", 1.0),), volumes=()),
        ]
        profiles = build_profiles(recs, 0, 10)
        p = profiles[1]
        assert p.gains["text"] == pytest.approx(2.0 + 0.5)
        assert p.gains["noise"] == pytest.approx(0.5)
        assert "numeric" not in p.gains
        assert p.volumes == {"text": 4.0, "noise": 2.0}
