import logging

import numpy as np
import pytest

from robustgd.aggregation import GradientSet, ScreenConfig, norm_screen
from robustgd.attacks import AttackSpec, craft
from robustgd.errors import ConfigError


def honest_scalars(*values):
    return GradientSet([np.array([float(v)]) for v in values])


class TestAggressive:
    def test_negative_scaled_reference(self):
        spec = AttackSpec(kind="aggressive", scale=10.0)
        out = craft(spec, honest_scalars(1), np.array([1.0, -2.0]))
        np.testing.assert_array_equal(out, np.array([-10.0, 20.0]))

    def test_output_norm_is_scale_times_reference_norm(self, rng):
        spec = AttackSpec(kind="aggressive", scale=3.5)
        reference = rng.standard_normal(12)
        out = craft(spec, honest_scalars(1), reference)
        assert np.linalg.norm(out) == pytest.approx(
            3.5 * np.linalg.norm(reference), rel=1e-12
        )


class TestIntelligent:
    def test_norm_is_ratio_times_reference_norm(self, rng):
        spec = AttackSpec(kind="intelligent", ratio=0.8, rng_seed=3)
        reference = rng.standard_normal(20)
        reference *= 5.0 / np.linalg.norm(reference)
        out = craft(spec, honest_scalars(1), reference, iteration=7, worker=2)
        assert np.linalg.norm(out) == pytest.approx(4.0, abs=1e-12)

    def test_same_seed_reproduces_bit_identically(self):
        spec = AttackSpec(kind="intelligent", rng_seed=11)
        ref = np.array([1.0, 2.0, 3.0])
        a = craft(spec, honest_scalars(1), ref, iteration=4, worker=9)
        b = craft(spec, honest_scalars(1), ref, iteration=4, worker=9)
        np.testing.assert_array_equal(a, b)

    def test_distinct_seeds_workers_iterations_give_distinct_directions(self):
        ref = np.array([1.0, 0.0, 0.0, 0.0])
        base = craft(AttackSpec(kind="intelligent", rng_seed=0), honest_scalars(1), ref)
        for spec, it, w in [
            (AttackSpec(kind="intelligent", rng_seed=1), 0, 0),
            (AttackSpec(kind="intelligent", rng_seed=0), 1, 0),
            (AttackSpec(kind="intelligent", rng_seed=0), 0, 1),
        ]:
            other = craft(spec, honest_scalars(1), ref, iteration=it, worker=w)
            assert not np.allclose(other, base)

    def test_shared_direction_flag_aligns_workers(self):
        spec = AttackSpec(kind="intelligent", shared_direction=True, rng_seed=5)
        ref = np.array([0.0, 3.0])
        a = craft(spec, honest_scalars(1), ref, iteration=2, worker=1)
        b = craft(spec, honest_scalars(1), ref, iteration=2, worker=8)
        np.testing.assert_array_equal(a, b)

    def test_zero_reference_degenerates_to_zero_with_log(self, caplog):
        spec = AttackSpec(kind="intelligent")
        with caplog.at_level(logging.WARNING, logger="robustgd.attacks"):
            out = craft(spec, honest_scalars(1), np.zeros(4))
        np.testing.assert_array_equal(out, np.zeros(4))
        assert any("degenerate" in rec.message for rec in caplog.records)


class TestCounterexample:
    def test_negates_the_rank_one_honest_gradient(self):
        # honest norms ascending: 1, 2, 3, 4, 5, 6 -> rank 1 is the value 2
        spec = AttackSpec(kind="counterexample", target_rank=1)
        out = craft(spec, honest_scalars(6, 5, 4, 3, 2, 1), np.array([3.5]))
        assert out[0] == -2.0

    def test_all_forgeries_survive_screening_in_the_ten_input_instance(self):
        spec = AttackSpec(kind="counterexample", target_rank=1)
        honest = honest_scalars(6, 5, 4, 3, 2, 1)
        forgery = craft(spec, honest, np.array([3.5]))
        vectors = [forgery] * 4 + [honest.matrix[i] for i in range(6)]
        out = norm_screen(GradientSet(vectors), ScreenConfig(4))
        # kept set is {-2, -2, -2, -2, 2, 1}: forgeries dominate the average
        assert out[0] == pytest.approx(-5.0 / 6.0, abs=1e-15)

    def test_rank_out_of_range(self):
        spec = AttackSpec(kind="counterexample", target_rank=6)
        with pytest.raises(ConfigError):
            craft(spec, honest_scalars(1, 2, 3), np.array([1.0]))


def test_spec_validation():
    with pytest.raises(ConfigError):
        AttackSpec(kind="nonsense")
    with pytest.raises(ConfigError):
        AttackSpec(kind="aggressive", scale=0.0)
    with pytest.raises(ConfigError):
        AttackSpec(kind="intelligent", ratio=-0.5)
    with pytest.raises(ConfigError):
        AttackSpec(kind="counterexample", target_rank=-1)
