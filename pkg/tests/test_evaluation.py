import itertools
import math

import numpy as np
import pytest

from drusenuq import (
    BinaryMask,
    ConfusionCounts,
    DegenerateSeries,
    ShapeMismatch,
    SizeClass,
    SizeThresholds,
    ThresholdPolicy,
    ValidationError,
    binarize,
    confusion,
    entropy_map,
    metrics,
    pearson,
    size_class,
    tertile_thresholds,
    thresholded_eval,
)

from conftest import fg_map


def brute_force_confusion(pred_bits, gt_bits, include=None):
    tp = fp = fn = tn = 0
    for i, (p, g) in enumerate(zip(pred_bits, gt_bits)):
        if include is not None and not include[i]:
            continue
        if p and g:
            tp += 1
        elif p and not g:
            fp += 1
        elif not p and g:
            fn += 1
        else:
            tn += 1
    return tp, fp, fn, tn


class TestConfusion:
    def test_perfect_all_ones(self):
        ones = BinaryMask(np.ones((3, 5), dtype=np.uint8))
        c = confusion(ones, ones)
        assert (c.tp, c.fp, c.fn, c.tn) == (15, 0, 0, 0)

    def test_hand_enumerated_four_pixel_case(self):
        pred = BinaryMask(np.array([[1, 1, 0, 0]]))
        gt = BinaryMask(np.array([[1, 0, 1, 0]]))
        c = confusion(pred, gt)
        assert (c.tp, c.fp, c.fn, c.tn) == (1, 1, 1, 1)

    def test_include_mask_recount(self):
        pred = BinaryMask(np.array([[1, 1, 0, 0]]))
        gt = BinaryMask(np.array([[1, 0, 1, 0]]))
        include = np.array([[True, False, False, True]])
        c = confusion(pred, gt, include=include)
        assert (c.tp, c.fp, c.fn, c.tn) == (1, 0, 0, 1)

    def test_matches_bruteforce_on_all_four_pixel_pairs(self):
        for pred_bits in itertools.product((0, 1), repeat=4):
            for gt_bits in itertools.product((0, 1), repeat=4):
                pred = BinaryMask(np.array(pred_bits).reshape(2, 2))
                gt = BinaryMask(np.array(gt_bits).reshape(2, 2))
                c = confusion(pred, gt)
                assert (c.tp, c.fp, c.fn, c.tn) == brute_force_confusion(pred_bits, gt_bits)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            confusion(BinaryMask(np.zeros((2, 2))), BinaryMask(np.zeros((3, 3))))

    def test_counts_must_be_nonnegative(self):
        with pytest.raises(ValidationError):
            ConfusionCounts(tp=-1, fp=0, fn=0, tn=0)


class TestMetrics:
    def test_direct_formula_case(self):
        m = metrics(ConfusionCounts(tp=1, fp=1, fn=1, tn=0))
        assert (m.dice, m.precision, m.recall) == (0.5, 0.5, 0.5)
        assert not m.degenerate

    def test_perfect_prediction(self):
        m = metrics(ConfusionCounts(tp=9, fp=0, fn=0, tn=7))
        assert (m.dice, m.precision, m.recall) == (1.0, 1.0, 1.0)

    def test_empty_vs_empty_convention(self):
        m = metrics(ConfusionCounts(tp=0, fp=0, fn=0, tn=4))
        assert (m.dice, m.precision, m.recall) == (1.0, 1.0, 1.0)
        assert m.degenerate

    def test_empty_gt_nonempty_pred(self):
        m = metrics(ConfusionCounts(tp=0, fp=3, fn=0, tn=1))
        assert m.dice == 0.0
        assert m.precision == 0.0
        assert math.isnan(m.recall)
        assert m.degenerate

    def test_nonempty_gt_empty_pred(self):
        m = metrics(ConfusionCounts(tp=0, fp=0, fn=3, tn=1))
        assert m.dice == 0.0
        assert math.isnan(m.precision)
        assert m.recall == 0.0
        assert m.degenerate

    def test_swap_symmetry_against_bruteforce_over_all_mask_pairs(self):
        # all 2^8 (pred, gt) pairs of 4-pixel masks: swapping pred<->gt
        # swaps precision<->recall and fixes dice.
        def eq(a, b):
            return (math.isnan(a) and math.isnan(b)) or a == b

        for pred_bits in itertools.product((0, 1), repeat=4):
            for gt_bits in itertools.product((0, 1), repeat=4):
                pred = BinaryMask(np.array(pred_bits).reshape(2, 2))
                gt = BinaryMask(np.array(gt_bits).reshape(2, 2))
                fwd = metrics(confusion(pred, gt))
                rev = metrics(confusion(gt, pred))
                assert eq(fwd.dice, rev.dice)
                assert eq(fwd.precision, rev.recall)
                assert eq(fwd.recall, rev.precision)


class TestBinarize:
    def test_boundary_is_inclusive(self):
        assert binarize(fg_map(np.array([[0.5]]))).data[0, 0] == 1

    def test_just_below_boundary(self):
        assert binarize(fg_map(np.array([[0.4999]]))).data[0, 0] == 0

    def test_uniform_map_is_all_ones(self):
        out = binarize(fg_map(np.full((3, 3), 0.5)))
        np.testing.assert_array_equal(out.data, np.ones((3, 3), dtype=np.uint8))

    def test_unanimous_volume_binarizes_to_per_pass_argmax(self, rng):
        # majority degenerate case: all passes agree, so the mean's
        # binarization equals any single pass's argmax
        from drusenuq import ProbVolume, Provenance, aggregate_passes

        fg = rng.uniform(size=(6, 6))
        passes = tuple(fg_map(fg) for _ in range(7))
        vol = ProbVolume(passes, Provenance.MC_DROPOUT)
        merged = binarize(aggregate_passes(vol))
        argmax = (np.argmax(passes[0].data, axis=2) == 1).astype(np.uint8)
        # argmax breaks the exact tie at 0.5 toward background; the gate is
        # inclusive there, so compare off the knife edge
        off_tie = fg != 0.5
        np.testing.assert_array_equal(merged.data[off_tie], argmax[off_tie])


class TestThresholdPolicy:
    def test_exactly_one_mode(self):
        with pytest.raises(ValidationError):
            ThresholdPolicy(quantile=None, absolute=None)
        with pytest.raises(ValidationError):
            ThresholdPolicy(quantile=0.9, absolute=0.5)

    def test_default_matches_two_and_a_half_percent(self):
        assert ThresholdPolicy().quantile == pytest.approx(0.975)

    def test_exclusion_bounded_by_one_minus_q(self, rng):
        values = rng.uniform(size=4000)
        for q in (0.5, 0.8, 0.975, 0.999):
            cutoff = ThresholdPolicy(quantile=q).cutoff(values)
            excluded = (values > cutoff).mean()
            assert excluded <= (1 - q) + 1e-12

    def test_near_one_quantile_excludes_nothing_on_distinct_values(self, rng):
        values = rng.permutation(np.linspace(0.0, 1.0, 500))
        cutoff = ThresholdPolicy(quantile=1.0 - 1e-9).cutoff(values)
        assert (values > cutoff).sum() == 0


class TestThresholdedEval:
    def test_zero_entropy_map_excludes_nothing(self):
        mean = fg_map(np.array([[1.0, 0.0], [1.0, 0.0]]))
        gt = BinaryMask(np.array([[1, 0], [0, 0]]))
        ent = entropy_map(mean)
        rep = thresholded_eval(mean, ent, gt)
        assert rep.excluded_fraction == 0.0
        assert rep.dice_thr == rep.dice
        assert rep.precision_thr == rep.precision
        assert rep.recall_thr == rep.recall

    def test_errors_on_top_entropy_pixels_are_healed(self):
        # 100 pixels; the predictor is wrong exactly on its 2 highest-entropy
        # pixels, so the 0.975-quantile cutoff removes exactly the errors.
        fg = np.full((10, 10), 0.9)
        gt_data = np.ones((10, 10), dtype=np.uint8)
        fg[0, 0] = 0.49  # false negative, entropy ~1 bit
        fg[0, 1] = 0.51  # true-ish positive with max entropy
        gt_data[0, 1] = 0
        gt = BinaryMask(gt_data)
        mean = fg_map(fg)
        ent = entropy_map(mean)
        rep = thresholded_eval(mean, ent, gt, ThresholdPolicy(quantile=0.975))
        assert rep.dice < 1.0
        assert rep.dice_thr == 1.0
        assert rep.excluded_fraction == pytest.approx(0.02)
        # brute-force recount over kept pixels
        keep = ent.data <= ThresholdPolicy(quantile=0.975).cutoff(ent.data)
        tp, fp, fn, tn = brute_force_confusion(
            binarize(mean).data.ravel(), gt.data.ravel(), include=keep.ravel()
        )
        assert rep.dice_thr == 2 * tp / (2 * tp + fp + fn)

    def test_absolute_cutoff_above_range_excludes_nothing(self, rng):
        fg = rng.uniform(size=(8, 8))
        gt = BinaryMask((fg > 0.5).astype(np.uint8))
        mean = fg_map(fg)
        ent = entropy_map(mean)
        rep = thresholded_eval(
            mean, ent, gt, ThresholdPolicy(quantile=None, absolute=1.0 + 1e-9)
        )
        assert rep.excluded_fraction == 0.0
        assert rep.dice_thr == rep.dice

    def test_shape_mismatch(self):
        mean = fg_map(np.full((2, 2), 0.5))
        ent = entropy_map(mean)
        with pytest.raises(ShapeMismatch):
            thresholded_eval(mean, ent, BinaryMask(np.zeros((3, 3))))


class TestSizeClass:
    def test_empty_gt_flagged(self):
        gt = BinaryMask(np.zeros((4, 4), dtype=np.uint8))
        assert size_class(gt, SizeThresholds(500, 2000)) is None

    def test_boundary_below_t2_is_medium(self):
        data = np.zeros((50, 50), dtype=np.uint8)
        data.ravel()[:1999] = 1
        assert size_class(BinaryMask(data), SizeThresholds(500, 2000)) is SizeClass.MEDIUM

    def test_class_boundaries(self):
        thresholds = SizeThresholds(500, 2000)

        def classify(count):
            data = np.zeros((60, 60), dtype=np.uint8)
            data.ravel()[:count] = 1
            return size_class(BinaryMask(data), thresholds)

        assert classify(499) is SizeClass.SMALL
        assert classify(500) is SizeClass.MEDIUM
        assert classify(2000) is SizeClass.LARGE

    def test_tertiles_split_distinct_counts_evenly(self, rng):
        counts = rng.choice(5000, size=30, replace=False) + 1
        thresholds = tertile_thresholds(counts)
        groups = {SizeClass.SMALL: 0, SizeClass.MEDIUM: 0, SizeClass.LARGE: 0}
        for count in counts:
            if count < thresholds.t1:
                groups[SizeClass.SMALL] += 1
            elif count < thresholds.t2:
                groups[SizeClass.MEDIUM] += 1
            else:
                groups[SizeClass.LARGE] += 1
        sizes = sorted(groups.values())
        assert sizes[-1] - sizes[0] <= 1


class TestPearson:
    def test_perfect_anticorrelation(self):
        xs = [0.1, 0.4, 0.5, 0.9]
        ys = [-x for x in xs]
        assert pearson(xs, ys) == pytest.approx(-1.0, abs=1e-12)

    def test_affine_transform_gives_plus_one(self):
        xs = [1.0, 2.0, 5.0, 7.0]
        ys = [2 * x + 3 for x in xs]
        assert pearson(xs, ys) == pytest.approx(1.0, abs=1e-12)

    def test_frozen_hand_case(self):
        # cov = 3/4, sd_x = sd_y = sqrt(5)/2 -> r = 0.6 exactly
        assert pearson([1, 2, 3, 4], [2, 1, 4, 3]) == pytest.approx(0.6, abs=1e-12)

    def test_matches_bruteforce_formula(self, rng):
        xs = rng.uniform(size=40)
        ys = rng.uniform(size=40)
        mx = sum(xs) / 40
        my = sum(ys) / 40
        cov = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
        sx = math.sqrt(sum((x - mx) ** 2 for x in xs))
        sy = math.sqrt(sum((y - my) ** 2 for y in ys))
        assert pearson(xs, ys) == pytest.approx(cov / (sx * sy), abs=1e-12)

    def test_sign_flip_under_negation(self, rng):
        xs = rng.uniform(size=20)
        ys = rng.uniform(size=20)
        assert pearson(xs, [-y for y in ys]) == pytest.approx(-pearson(xs, ys), abs=1e-12)

    def test_invariant_under_positive_affine_maps(self, rng):
        xs = rng.uniform(size=20)
        ys = rng.uniform(size=20)
        base = pearson(xs, ys)
        assert pearson([3 * x + 1 for x in xs], ys) == pytest.approx(base, abs=1e-12)

    def test_constant_series_rejected(self):
        with pytest.raises(DegenerateSeries):
            pearson([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])

    def test_short_series_rejected(self):
        with pytest.raises(DegenerateSeries):
            pearson([1.0], [2.0])

    def test_length_mismatch(self):
        with pytest.raises(ShapeMismatch):
            pearson([1.0, 2.0], [1.0, 2.0, 3.0])
