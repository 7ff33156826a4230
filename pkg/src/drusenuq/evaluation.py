"""Segmentation scoring: plain and uncertainty-thresholded dice/precision/
recall, lesion-size stratification, and uncertainty-accuracy correlation.

The thresholded variants exclude the least-confident pixels (entropy above
a cutoff) from the confusion counts, evaluating the model only where it is
certain; the cutoff is a per-image entropy quantile by default, tuned so
roughly 2-3% of pixels drop out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSeries, ShapeMismatch, ValidationError
from .types import (
    BinaryMask,
    EntropyMap,
    EvalReport,
    ProbMap,
    SizeClass,
    SizeThresholds,
    foreground,
)
from .uncertainty import FOREGROUND_GATE, average_drusen_uncertainty

DEFAULT_EXCLUDE_FRACTION = 0.025


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        for name in ("tp", "fp", "fn", "tn"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be >= 0")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class ThresholdPolicy:
    """How the entropy cutoff is chosen.

    ``quantile`` mode takes the q-th order statistic of this image's
    entropy values (k = ceil(q*n)), so at most a (1-q) fraction of pixels
    can sit strictly above the cutoff. ``absolute`` mode uses a fixed
    entropy value in the map's units. Pixels strictly greater than the
    cutoff are excluded.
    """

    quantile: float | None = 1.0 - DEFAULT_EXCLUDE_FRACTION
    absolute: float | None = None

    def __post_init__(self):
        if (self.quantile is None) == (self.absolute is None):
            raise ValidationError("set exactly one of quantile / absolute")
        if self.quantile is not None and not 0.0 < self.quantile < 1.0:
            raise ValidationError(f"quantile must be in (0, 1), got {self.quantile}")
        if self.absolute is not None and self.absolute < 0.0:
            raise ValidationError(f"absolute cutoff must be >= 0, got {self.absolute}")

    def cutoff(self, entropy_values: np.ndarray) -> float:
        if self.absolute is not None:
            return float(self.absolute)
        values = np.asarray(entropy_values, dtype=np.float64).ravel()
        n = values.size
        k = min(max(int(math.ceil(self.quantile * n)), 1), n)
        return float(np.partition(values, k - 1)[k - 1])


def confusion(
    pred: BinaryMask, gt: BinaryMask, include: np.ndarray | None = None
) -> ConfusionCounts:
    """Pixel confusion counts, restricted to ``include`` when given."""
    if pred.shape != gt.shape:
        raise ShapeMismatch(f"pred shape {pred.shape} != gt shape {gt.shape}")
    p = pred.data.astype(bool)
    g = gt.data.astype(bool)
    if include is None:
        keep = np.ones(p.shape, dtype=bool)
    else:
        keep = np.asarray(include, dtype=bool)
        if keep.shape != p.shape:
            raise ShapeMismatch(
                f"include mask shape {keep.shape} != mask shape {p.shape}"
            )
    return ConfusionCounts(
        tp=int(np.count_nonzero(p & g & keep)),
        fp=int(np.count_nonzero(p & ~g & keep)),
        fn=int(np.count_nonzero(~p & g & keep)),
        tn=int(np.count_nonzero(~p & ~g & keep)),
    )


@dataclass(frozen=True)
class Metrics:
    """Dice, precision, recall; NaN marks an undefined 0/0 ratio.

    ``degenerate`` is set whenever any empty-mask convention fired, so
    aggregates can skip or report these cases honestly.
    """

    dice: float
    precision: float
    recall: float
    degenerate: bool = False


def metrics(c: ConfusionCounts) -> Metrics:
    """Scores from confusion counts with explicit empty-mask conventions.

    Both masks empty -> all scores 1.0, flagged. An empty side of a ratio
    (0/0) is undefined -> NaN, flagged; ratios with a nonzero denominator
    use the plain formulas.
    """
    gt_empty = c.tp + c.fn == 0
    pred_empty = c.tp + c.fp == 0
    if gt_empty and pred_empty:
        return Metrics(1.0, 1.0, 1.0, degenerate=True)
    dice = 2.0 * c.tp / (2.0 * c.tp + c.fp + c.fn)
    precision = math.nan if pred_empty else c.tp / (c.tp + c.fp)
    recall = math.nan if gt_empty else c.tp / (c.tp + c.fn)
    return Metrics(dice, precision, recall, degenerate=gt_empty or pred_empty)


def binarize(mean: ProbMap, gate: float = FOREGROUND_GATE) -> BinaryMask:
    """Hard segmentation: pixel = 1 iff foreground probability >= gate."""
    return BinaryMask((foreground(mean) >= gate).astype(np.uint8))


def size_class(gt: BinaryMask, thresholds: SizeThresholds) -> SizeClass | None:
    """Lesion-size class by total foreground pixel count.

    Returns None for an empty ground truth (no lesion to size).
    """
    count = gt.foreground_count()
    if count == 0:
        return None
    if count < thresholds.t1:
        return SizeClass.SMALL
    if count < thresholds.t2:
        return SizeClass.MEDIUM
    return SizeClass.LARGE


def tertile_thresholds(counts) -> SizeThresholds:
    """Dataset tertiles of foreground pixel counts as size boundaries.

    Uses the order statistics sorted[ceil(n/3)] and sorted[ceil(2n/3)]
    (0-indexed), which split distinct counts into three groups whose sizes
    differ by at most one.
    """
    values = sorted(int(v) for v in counts)
    n = len(values)
    if n < 3:
        raise ValidationError(f"need at least 3 counts for tertiles, got {n}")
    t1 = values[math.ceil(n / 3)]
    t2 = values[math.ceil(2 * n / 3)]
    if t1 >= t2:
        raise ValidationError(
            f"tertile boundaries ({t1}, {t2}) are not strictly increasing; "
            "pass explicit thresholds for heavily tied counts"
        )
    return SizeThresholds(t1, t2)


def thresholded_eval(
    mean: ProbMap,
    ent: EntropyMap,
    gt: BinaryMask,
    policy: ThresholdPolicy | None = None,
    size_thresholds: SizeThresholds | None = None,
    pass_count: int | None = None,
) -> EvalReport:
    """Plain and uncertainty-thresholded scores for one image.

    The entropy cutoff comes from ``policy`` (per-image quantile by
    default); pixels strictly above it are excluded from the thresholded
    confusion counts. The report also carries the mean foreground entropy
    (``u_avg``) and the realized exclusion fraction.
    """
    if policy is None:
        policy = ThresholdPolicy()
    if mean.shape != ent.shape or mean.shape != gt.shape:
        raise ShapeMismatch(
            f"shapes differ: mean {mean.shape}, entropy {ent.shape}, gt {gt.shape}"
        )
    pred = binarize(mean)
    plain = metrics(confusion(pred, gt))

    cutoff = policy.cutoff(ent.data)
    include = ent.data <= cutoff
    thr = metrics(confusion(pred, gt, include=include))
    excluded = 1.0 - include.mean()

    u_avg, n_sel = average_drusen_uncertainty(mean, ent)
    sclass = size_class(gt, size_thresholds) if size_thresholds is not None else None
    return EvalReport(
        dice=plain.dice,
        precision=plain.precision,
        recall=plain.recall,
        dice_thr=thr.dice,
        precision_thr=thr.precision,
        recall_thr=thr.recall,
        u_avg=u_avg,
        u_avg_count=n_sel,
        excluded_fraction=float(excluded),
        degenerate=plain.degenerate,
        degenerate_thr=thr.degenerate,
        size_class=sclass,
        pass_count=pass_count,
    )


def pearson(xs, ys) -> float:
    """Sample Pearson correlation coefficient of two equal-length series.

    Raises DegenerateSeries when fewer than two points are given or either
    series is constant.
    """
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape:
        raise ShapeMismatch(f"series lengths differ: {x.shape} vs {y.shape}")
    if x.ndim != 1 or x.size < 2:
        raise DegenerateSeries(f"need >= 2 paired samples, got {x.size}")
    dx = x - x.mean()
    dy = y - y.mean()
    sx = math.sqrt(float(np.dot(dx, dx)))
    sy = math.sqrt(float(np.dot(dy, dy)))
    if sx == 0.0 or sy == 0.0:
        raise DegenerateSeries("constant series has no defined correlation")
    r = float(np.dot(dx, dy)) / (sx * sy)
    return max(-1.0, min(1.0, r))
