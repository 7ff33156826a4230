import math

import numpy as np
import pytest

from drusenuq import (
    Druse,
    DrusenOutOfBounds,
    MockPredictorSpec,
    Provenance,
    SceneSpec,
    TransformKind,
    TransformRecord,
    ValidationError,
    aggregate_passes,
    average_drusen_uncertainty,
    binarize,
    entropy_map,
    generate_scene,
    mock_predict,
    run_mc,
    run_tta,
    sample_scene_spec,
    signed_boundary_distance,
)
from drusenuq.synthetic import input_perturbation


def flat_scene(h=48, w=48, drusen=(), speckle=0.0, seed=0):
    return SceneSpec(
        shape=(h, w), layer_rows=(h // 3, 2 * h // 3), drusen=drusen, speckle_sigma=speckle, seed=seed
    )


class TestGenerateScene:
    def test_noise_free_lesion_free_scene_is_banded(self):
        img, mask = generate_scene(flat_scene())
        assert mask.foreground_count() == 0
        # piecewise-constant bands: each band row identical, few distinct levels
        assert len(np.unique(img.data)) == 3
        assert (np.ptp(img.data, axis=1) == 0).all()

    def test_ellipse_pixel_count_near_analytic_area(self):
        for a, b in ((12, 7), (15, 9), (8, 5)):
            druse = Druse(row=24, col=24, radius_row=b, radius_col=a)
            _, mask = generate_scene(flat_scene(drusen=(druse,)))
            # brute-force rasterized area oracle
            expected = 0
            for r in range(48):
                for c in range(48):
                    if ((r - 24) / b) ** 2 + ((c - 24) / a) ** 2 <= 1.0:
                        expected += 1
            assert mask.foreground_count() == expected
            assert abs(expected - math.pi * a * b) / (math.pi * a * b) <= 0.05

    def test_deterministic_in_seed(self):
        spec = flat_scene(speckle=0.2, seed=99, drusen=(Druse(16, 20, 4, 6),))
        img1, mask1 = generate_scene(spec)
        img2, mask2 = generate_scene(spec)
        np.testing.assert_array_equal(img1.data, img2.data)
        np.testing.assert_array_equal(mask1.data, mask2.data)

    def test_out_of_bounds_druse_rejected(self):
        with pytest.raises(DrusenOutOfBounds):
            flat_scene(drusen=(Druse(row=2, col=24, radius_row=5, radius_col=5),))

    def test_sampled_specs_are_deterministic_and_valid(self):
        a = sample_scene_spec(7)
        b = sample_scene_spec(7)
        assert a == b
        img, mask = generate_scene(a)
        assert mask.foreground_count() > 0

    def test_sampled_radii_adapt_to_small_scenes(self):
        spec = sample_scene_spec(3, shape=(32, 32))
        img, mask = generate_scene(spec)
        assert mask.foreground_count() > 0
        with pytest.raises(ValidationError):
            sample_scene_spec(3, shape=(8, 8))


class TestSignedDistance:
    def test_sign_convention(self, small_mask):
        sd = signed_boundary_distance(small_mask)
        inside = small_mask.data.astype(bool)
        assert (sd[inside] >= 1.0).all()
        assert (sd[~inside] <= -1.0).all()

    def test_degenerate_masks_plateau(self):
        from drusenuq import BinaryMask

        empty = BinaryMask(np.zeros((4, 6), dtype=np.uint8))
        full = BinaryMask(np.ones((4, 6), dtype=np.uint8))
        assert (signed_boundary_distance(empty) == -10.0).all()
        assert (signed_boundary_distance(full) == 10.0).all()


class TestMockPredict:
    def test_hard_noiseless_predictor_recovers_gt(self):
        img, gt = generate_scene(flat_scene(drusen=(Druse(24, 24, 6, 9),)))
        spec = MockPredictorSpec(sigma_model=0.0, gain=0.0, softness=1e-6)
        pm = mock_predict(spec, img, gt, 0)
        np.testing.assert_array_equal(binarize(pm).data, gt.data)

    def test_soft_noiseless_predictor_still_recovers_gt(self):
        # |signed distance| >= 1 everywhere, so the gate never flips
        img, gt = generate_scene(flat_scene(drusen=(Druse(24, 24, 6, 9),)))
        spec = MockPredictorSpec(sigma_model=0.0, gain=0.0, softness=3.0)
        np.testing.assert_array_equal(binarize(mock_predict(spec, img, gt, 0)).data, gt.data)

    def test_no_stochasticity_means_identical_passes(self):
        img, gt = generate_scene(flat_scene(drusen=(Druse(24, 24, 6, 9),)))
        spec = MockPredictorSpec(sigma_model=0.0, gain=0.0, softness=1.5)
        maps = [mock_predict(spec, img, gt, t) for t in range(5)]
        for m in maps[1:]:
            np.testing.assert_array_equal(m.data, maps[0].data)

    def test_noise_raises_mean_entropy(self):
        img, gt = generate_scene(flat_scene(drusen=(Druse(24, 24, 6, 9),), speckle=0.1, seed=5))
        quiet = MockPredictorSpec(sigma_model=0.0, gain=0.0, softness=1.5, seed=1)
        noisy = MockPredictorSpec(sigma_model=2.0, gain=0.0, softness=1.5, seed=1)
        # Monte-Carlo estimate over 100 passes each
        ent_quiet = entropy_map(aggregate_passes(run_mc(quiet, img, gt, passes=100)))
        ent_noisy = entropy_map(aggregate_passes(run_mc(noisy, img, gt, passes=100)))
        assert ent_noisy.data.mean() > ent_quiet.data.mean()

    def test_input_perturbation_redraws_on_intensity_change(self):
        base = np.full((6, 6), 0.40)
        shifted = np.full((6, 6), 0.45)
        a = input_perturbation(base, seed=3)
        b = input_perturbation(shifted, seed=3)
        assert not np.array_equal(a, b)
        np.testing.assert_array_equal(a, input_perturbation(base.copy(), seed=3))


class TestRunners:
    def _scene(self):
        return generate_scene(flat_scene(drusen=(Druse(24, 24, 6, 9),), speckle=0.1, seed=2))

    def test_single_pass_modes_agree_under_identity_transform(self):
        img, gt = self._scene()
        spec = MockPredictorSpec(sigma_model=0.0, gain=0.5, softness=1.5, seed=4)
        identity = TransformRecord(TransformKind.ROTATE90, 0, k=0)
        mc = run_mc(spec, img, gt, passes=1)
        tta = run_tta(spec, img, gt, passes=1, records=(identity,))
        np.testing.assert_array_equal(mc.maps[0].data, tta.maps[0].data)
        assert mc.provenance is Provenance.MC_DROPOUT
        assert tta.provenance is Provenance.TTA

    def test_mc_repeat_is_bit_identical(self):
        img, gt = self._scene()
        spec = MockPredictorSpec(sigma_model=1.0, gain=1.0, softness=1.5, seed=4)
        v1 = run_mc(spec, img, gt, passes=10)
        v2 = run_mc(spec, img, gt, passes=10)
        for a, b in zip(v1.maps, v2.maps):
            np.testing.assert_array_equal(a.data, b.data)

    def test_tta_repeat_is_bit_identical(self):
        img, gt = self._scene()
        spec = MockPredictorSpec(sigma_model=1.0, gain=1.0, softness=1.5, seed=4)
        v1 = run_tta(spec, img, gt, passes=10, tta_seed=17)
        v2 = run_tta(spec, img, gt, passes=10, tta_seed=17)
        assert v1.transforms == v2.transforms
        for a, b in zip(v1.maps, v2.maps):
            np.testing.assert_array_equal(a.data, b.data)

    def test_photometric_only_zero_gain_gives_identical_maps(self):
        img, gt = self._scene()
        spec = MockPredictorSpec(sigma_model=1.0, gain=0.0, softness=1.5, seed=4)
        records = (
            TransformRecord(TransformKind.BRIGHTNESS, 0, delta=0.15),
            TransformRecord(TransformKind.CONTRAST, 1, factor=0.8),
            TransformRecord(TransformKind.GAUSSIAN_BLUR, 2, sigma=1.5),
        )
        vol = run_tta(spec, img, gt, passes=3, records=records)
        for m in vol.maps[1:]:
            np.testing.assert_array_equal(m.data, vol.maps[0].data)

    def test_tta_maps_live_in_input_geometry(self):
        img, gt = self._scene()
        spec = MockPredictorSpec(sigma_model=0.0, gain=0.0, softness=1e-6, seed=4)
        vol = run_tta(spec, img, gt, passes=8, tta_seed=3)
        for m in vol.maps:
            np.testing.assert_array_equal(binarize(m).data, gt.data)

    def test_record_count_must_match_passes(self):
        img, gt = self._scene()
        spec = MockPredictorSpec()
        with pytest.raises(ValidationError):
            run_tta(spec, img, gt, passes=3, records=(TransformRecord(TransformKind.HORIZONTAL_FLIP, 0),))


class TestKnobMonotonicity:
    def _dataset_mean_entropy(self, sigma, gain, mode):
        total = []
        for i in range(6):
            spec = sample_scene_spec(seed=1500 + i, shape=(64, 64))
            img, gt = generate_scene(spec)
            ps = MockPredictorSpec(sigma_model=sigma, gain=gain, softness=1.5, seed=1600 + i)
            if mode == "mc":
                vol = run_mc(ps, img, gt, passes=10)
            else:
                vol = run_tta(ps, img, gt, passes=10, tta_seed=1700 + i)
            total.append(entropy_map(aggregate_passes(vol)).data.mean())
        return float(np.mean(total))

    def test_entropy_nondecreasing_in_sigma(self):
        values = [self._dataset_mean_entropy(s, 0.5, "mc") for s in (0.0, 0.5, 1.0, 2.0)]
        assert all(b >= a for a, b in zip(values, values[1:])), values

    def test_entropy_nondecreasing_in_gain(self):
        values = [self._dataset_mean_entropy(0.5, g, "tta") for g in (0.0, 0.5, 1.0, 2.0)]
        assert all(b >= a for a, b in zip(values, values[1:])), values


class TestQualitativeClaims:
    def test_boundary_entropy_exceeds_far_field(self):
        for i in range(5):
            spec = sample_scene_spec(seed=300 + i, shape=(64, 64))
            img, gt = generate_scene(spec)
            ps = MockPredictorSpec(sigma_model=1.0, gain=1.0, softness=1.5, seed=400 + i)
            ent = entropy_map(aggregate_passes(run_mc(ps, img, gt, passes=10)))
            near = np.abs(signed_boundary_distance(gt)) <= 2.0
            assert ent.data[near].mean() > ent.data[~near].mean()

    def test_small_lesions_more_uncertain_than_large(self):
        def mean_u(radius_col, radius_row):
            vals = []
            for i in range(8):
                spec = sample_scene_spec(
                    seed=600 + i,
                    shape=(64, 64),
                    max_drusen=1,
                    radius_col_range=radius_col,
                    radius_row_range=radius_row,
                )
                img, gt = generate_scene(spec)
                ps = MockPredictorSpec(sigma_model=1.0, gain=1.0, softness=1.5, seed=700 + i)
                mean = aggregate_passes(run_mc(ps, img, gt, passes=10))
                u, _ = average_drusen_uncertainty(mean, entropy_map(mean))
                vals.append(u)
            return np.mean(vals)

        assert mean_u((4, 6), (3, 4)) >= mean_u((14, 18), (7, 9))
