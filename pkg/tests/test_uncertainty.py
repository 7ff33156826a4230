import math

import numpy as np
import pytest

from drusenuq import (
    AggregationConfig,
    EntropyMap,
    ProbMap,
    ProbVolume,
    Provenance,
    ShapeMismatch,
    ValidationError,
    aggregate_passes,
    average_drusen_uncertainty,
    entropy_map,
)

from conftest import fg_map

# -sum(p * log2 p) for p = (0.9, 0.1); derivation: high-precision evaluation
# (50-digit arithmetic gives 0.46899559358928122...)
ENTROPY_09_01 = 0.4689955935892812


def random_volume(rng, passes, classes, side):
    raw = rng.uniform(0.05, 1.0, size=(passes, side, side, classes))
    raw /= raw.sum(axis=-1, keepdims=True)
    return ProbVolume(tuple(ProbMap(m) for m in raw), Provenance.MC_DROPOUT)


class TestAggregatePasses:
    def test_single_pass_is_identity(self, rng):
        vol = random_volume(rng, 1, 2, 4)
        np.testing.assert_array_equal(aggregate_passes(vol).data, vol.maps[0].data)

    def test_symmetric_two_pass_mean(self):
        a = ProbMap(np.array([[[1.0, 0.0]]]))
        b = ProbMap(np.array([[[0.0, 1.0]]]))
        vol = ProbVolume((a, b), Provenance.MC_DROPOUT)
        np.testing.assert_array_equal(aggregate_passes(vol).data, [[[0.5, 0.5]]])

    def test_one_hot_frequency_count(self):
        # 10 one-hot passes, class 1 chosen 7 times -> foreground 0.7
        maps = []
        for t in range(10):
            hot = 1 if t < 7 else 0
            data = np.zeros((2, 2, 2))
            data[:, :, hot] = 1.0
            maps.append(ProbMap(data))
        mean = aggregate_passes(ProbVolume(tuple(maps), Provenance.MC_DROPOUT))
        np.testing.assert_allclose(mean.data[:, :, 1], 0.7, atol=1e-15)

    def test_matches_bruteforce_mean(self, rng):
        vol = random_volume(rng, 7, 3, 5)
        mean = aggregate_passes(vol)
        for i in range(5):
            for j in range(5):
                for c in range(3):
                    expected = sum(m.data[i, j, c] for m in vol.maps) / 7
                    assert abs(mean.data[i, j, c] - expected) <= 1e-12

    def test_exactly_invariant_under_pass_permutation(self, rng):
        vol = random_volume(rng, 8, 2, 6)
        perm = rng.permutation(8)
        shuffled = ProbVolume(tuple(vol.maps[i] for i in perm), Provenance.MC_DROPOUT)
        np.testing.assert_array_equal(
            aggregate_passes(vol).data, aggregate_passes(shuffled).data
        )


class TestEntropyMap:
    def test_uniform_pixel_is_one_bit(self):
        ent = entropy_map(fg_map(np.array([[0.5]])))
        assert abs(ent.data[0, 0] - 1.0) <= 1e-12

    def test_one_hot_pixel_is_zero_bits(self):
        ent = entropy_map(fg_map(np.array([[1.0]])))
        assert ent.data[0, 0] == 0.0

    def test_frozen_skewed_value(self):
        ent = entropy_map(fg_map(np.array([[0.9]])))
        assert abs(ent.data[0, 0] - ENTROPY_09_01) <= 1e-12
        assert abs(ent.data[0, 0] - 0.4690) <= 1e-4

    def test_nats_option(self):
        ent = entropy_map(fg_map(np.array([[0.5]])), base=math.e)
        assert abs(ent.data[0, 0] - math.log(2)) <= 1e-12

    def test_maximized_exactly_at_uniform(self, rng):
        fg = rng.uniform(size=(10, 10))
        fg[0, 0] = 0.5
        ent = entropy_map(fg_map(fg))
        assert ent.data[0, 0] == ent.data.max()
        assert abs(ent.data[0, 0] - 1.0) <= 1e-12

    def test_three_class_uniform_hits_log2_c(self):
        m = ProbMap(np.full((1, 1, 3), 1.0 / 3.0))
        ent = entropy_map(m)
        assert abs(ent.data[0, 0] - math.log2(3)) <= 1e-12
        assert ent.n_classes == 3

    def test_jensen_direction_holds_pixelwise(self, rng):
        from test_uncertainty import random_volume

        for _ in range(25):
            vol = random_volume(rng, 6, 2, 4)
            mixture = entropy_map(aggregate_passes(vol)).data
            per_pass = np.mean([entropy_map(m).data for m in vol.maps], axis=0)
            assert (mixture - per_pass >= -1e-9).all()


class TestAverageDrusenUncertainty:
    def test_confident_everywhere(self):
        mean = fg_map(np.ones((3, 4)))
        u, n = average_drusen_uncertainty(mean, entropy_map(mean))
        assert u == 0.0
        assert n == 12

    def test_only_gated_pixels_counted(self):
        mean = fg_map(np.array([[0.9, 0.1]]))
        ent = entropy_map(mean)
        u, n = average_drusen_uncertainty(mean, ent)
        assert n == 1
        assert abs(u - ENTROPY_09_01) <= 1e-12

    def test_empty_selection_flagged(self):
        mean = fg_map(np.full((2, 2), 0.2))
        u, n = average_drusen_uncertainty(mean, entropy_map(mean))
        assert (u, n) == (0.0, 0)

    def test_gate_is_inclusive_at_half(self):
        mean = fg_map(np.array([[0.5, 0.4999]]))
        _, n = average_drusen_uncertainty(mean, entropy_map(mean))
        assert n == 1

    def test_all_selected_equals_plain_mean(self, rng):
        fg = rng.uniform(0.5, 1.0, size=(5, 5))
        mean = fg_map(fg)
        ent = entropy_map(mean)
        u, n = average_drusen_uncertainty(mean, ent)
        assert n == 25
        assert u == pytest.approx(ent.data.mean(), abs=1e-15)

    def test_shape_mismatch(self):
        mean = fg_map(np.full((2, 2), 0.5))
        ent = EntropyMap(np.zeros((3, 3)), n_classes=2)
        with pytest.raises(ShapeMismatch):
            average_drusen_uncertainty(mean, ent)


class TestAggregationConfig:
    def test_default_pass_count_is_ten(self):
        assert AggregationConfig().pass_count == 10

    def test_rejects_zero_passes(self):
        with pytest.raises(ValidationError):
            AggregationConfig(pass_count=0)
