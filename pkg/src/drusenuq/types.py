"""Core domain types: images, masks, probability maps, entropy maps, reports.

All types are immutable after construction (arrays are frozen with
``writeable = False``) and validate their invariants eagerly; invalid data
is rejected, never clamped. Probabilities are widened to float64 for all
in-memory arithmetic regardless of how files store them.

Class index 1 is the foreground (drusen) class everywhere; index 0 is
background.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptyVolume,
    NonFiniteValue,
    OutOfRange,
    ShapeMismatch,
    SumNotOne,
    ValidationError,
)

FOREGROUND_CLASS = 1

#: per-pixel tolerance for class probabilities summing to 1 (in-memory types)
PROB_SUM_TOL = 1e-6


def _frozen(arr: np.ndarray, dtype) -> np.ndarray:
    out = np.array(arr, dtype=dtype, copy=True, order="C")
    out.setflags(write=False)
    return out


def validate_prob_map(data) -> None:
    """Validate per-pixel class probabilities, reporting the first bad pixel.

    ``data`` may be a ProbMap or an (H, W, C) array-like. Checks run per
    pixel in row-major order; for the first offending pixel the checks are
    applied in the order finite -> range -> sum.

    Raises:
        NonFiniteValue, OutOfRange, SumNotOne, ShapeMismatch, ValidationError
    """
    if isinstance(data, ProbMap):
        arr = data.data
    else:
        arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 3:
        raise ShapeMismatch(f"expected (H, W, C) probabilities, got shape {arr.shape}")
    if arr.shape[2] < 2:
        raise ValidationError(f"need at least 2 classes, got {arr.shape[2]}")

    flat = arr.reshape(-1, arr.shape[2])
    finite = np.isfinite(flat).all(axis=1)
    in_range = ((flat >= 0.0) & (flat <= 1.0)) | ~np.isfinite(flat)
    in_range = in_range.all(axis=1)
    sums = flat.sum(axis=1)
    sum_ok = np.abs(sums - 1.0) <= PROB_SUM_TOL
    bad = ~(finite & in_range & sum_ok)
    if not bad.any():
        return
    pixel = int(np.argmax(bad))
    row = flat[pixel]
    if not np.isfinite(row).all():
        value = row[int(np.argmax(~np.isfinite(row)))]
        raise NonFiniteValue(pixel, float(value))
    outside = (row < 0.0) | (row > 1.0)
    if outside.any():
        value = row[int(np.argmax(outside))]
        raise OutOfRange(pixel, float(value))
    raise SumNotOne(pixel, float(sums[pixel]))


@dataclass(frozen=True)
class GrayImage:
    """Single-channel intensity raster with values in [0, 1], shape (H, W)."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2:
            raise ShapeMismatch(f"expected 2-D image, got shape {arr.shape}")
        flat = arr.ravel()
        finite = np.isfinite(flat)
        if not finite.all():
            pixel = int(np.argmax(~finite))
            raise NonFiniteValue(pixel, float(flat[pixel]))
        outside = (flat < 0.0) | (flat > 1.0)
        if outside.any():
            pixel = int(np.argmax(outside))
            raise OutOfRange(pixel, float(flat[pixel]))
        object.__setattr__(self, "data", _frozen(arr, np.float64))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape


@dataclass(frozen=True)
class BinaryMask:
    """Row-major {0, 1} labels, shape (H, W); 1 marks the foreground class."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 2:
            raise ShapeMismatch(f"expected 2-D mask, got shape {arr.shape}")
        vals = np.unique(arr)
        if not np.isin(vals, (0, 1)).all():
            bad = vals[~np.isin(vals, (0, 1))][0]
            raise ValidationError(f"mask values must be 0 or 1, found {bad!r}")
        object.__setattr__(self, "data", _frozen(arr, np.uint8))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def foreground_count(self) -> int:
        return int(self.data.sum())


@dataclass(frozen=True)
class ProbMap:
    """Per-pixel class probabilities, shape (H, W, C) with C >= 2.

    Every pixel's class vector lies in [0, 1] and sums to 1 within
    ``PROB_SUM_TOL``.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        validate_prob_map(arr)
        object.__setattr__(self, "data", _frozen(arr, np.float64))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def classes(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape[:2]


def foreground(prob_map: ProbMap) -> np.ndarray:
    """Per-pixel probability of the foreground class (index 1), shape (H, W)."""
    return prob_map.data[:, :, FOREGROUND_CLASS]


class Provenance(enum.Enum):
    MC_DROPOUT = "mc-dropout"
    TTA = "tta"
    EXTERNAL = "external"


@dataclass(frozen=True)
class ProbVolume:
    """Stack of T per-pass probability maps of identical shape.

    For TTA provenance each map must already be back-transformed to the
    input geometry (the inverse of its geometric transform applied before
    storage) and the generating transform records must be attached, one
    per pass.
    """

    maps: tuple
    provenance: Provenance
    transforms: tuple | None = None

    def __post_init__(self):
        maps = tuple(self.maps)
        if len(maps) == 0:
            raise EmptyVolume("a probability volume needs at least one pass")
        for m in maps:
            if not isinstance(m, ProbMap):
                raise ValidationError(f"volume entries must be ProbMap, got {type(m)!r}")
        shape0 = maps[0].data.shape
        for i, m in enumerate(maps):
            if m.data.shape != shape0:
                raise ShapeMismatch(
                    f"pass {i} has shape {m.data.shape}, expected {shape0}"
                )
        if self.provenance is Provenance.TTA:
            if self.transforms is None:
                raise ValidationError("tta volumes must carry their transform records")
            records = tuple(self.transforms)
            if len(records) != len(maps):
                raise ValidationError(
                    f"{len(records)} transform records for {len(maps)} passes"
                )
            object.__setattr__(self, "transforms", records)
        elif self.transforms is not None:
            raise ValidationError("transform records are only valid for tta provenance")
        object.__setattr__(self, "maps", maps)

    @property
    def passes(self) -> int:
        return len(self.maps)

    @property
    def classes(self) -> int:
        return self.maps[0].classes

    @property
    def shape(self) -> tuple[int, int]:
        return self.maps[0].shape

    def stack(self) -> np.ndarray:
        """All passes as one (T, H, W, C) float64 array."""
        return np.stack([m.data for m in self.maps], axis=0)


@dataclass(frozen=True)
class EntropyMap:
    """Pixel-wise predictive entropy, shape (H, W).

    Values lie in [0, log_base(C)]; the class count and log base are kept
    so the bound stays checkable and renderers know the full scale.
    """

    data: np.ndarray
    n_classes: int
    base: float = 2.0

    _BOUND_SLACK = 1e-9

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2:
            raise ShapeMismatch(f"expected 2-D entropy map, got shape {arr.shape}")
        if self.n_classes < 2:
            raise ValidationError(f"need at least 2 classes, got {self.n_classes}")
        if self.base <= 1.0:
            raise ValidationError(f"log base must exceed 1, got {self.base}")
        flat = arr.ravel()
        finite = np.isfinite(flat)
        if not finite.all():
            pixel = int(np.argmax(~finite))
            raise NonFiniteValue(pixel, float(flat[pixel]))
        bound = self.max_value + self._BOUND_SLACK
        outside = (flat < 0.0) | (flat > bound)
        if outside.any():
            pixel = int(np.argmax(outside))
            raise OutOfRange(pixel, float(flat[pixel]))
        object.__setattr__(self, "data", _frozen(arr, np.float64))

    @property
    def max_value(self) -> float:
        """Largest possible entropy for this class count and base."""
        return math.log(self.n_classes) / math.log(self.base)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape


class SizeClass(enum.Enum):
    LARGE = "large"
    MEDIUM = "medium"
    SMALL = "small"


@dataclass(frozen=True)
class SizeThresholds:
    """Strictly increasing foreground-pixel-count boundaries (t1, t2).

    count < t1 -> Small; t1 <= count < t2 -> Medium; count >= t2 -> Large.
    """

    t1: int
    t2: int

    def __post_init__(self):
        if not self.t1 < self.t2:
            raise ValidationError(
                f"size thresholds must increase strictly, got ({self.t1}, {self.t2})"
            )


def _check_ratio(name: str, value: float, allow_nan: bool) -> None:
    if math.isnan(value):
        if not allow_nan:
            raise ValidationError(f"{name} is NaN but not flagged degenerate")
        return
    if not 0.0 <= value <= 1.0:
        raise ValidationError(f"{name}={value!r} outside [0, 1]")


@dataclass(frozen=True)
class EvalReport:
    """Per-image evaluation: plain and uncertainty-thresholded scores.

    NaN metric values are only legal when the matching degenerate flag is
    set (empty-mask corner cases); ``u_avg_empty`` marks an empty
    foreground selection (no pixel reached the probability gate).
    """

    dice: float
    precision: float
    recall: float
    dice_thr: float
    precision_thr: float
    recall_thr: float
    u_avg: float
    u_avg_count: int
    excluded_fraction: float
    degenerate: bool = False
    degenerate_thr: bool = False
    size_class: SizeClass | None = None
    pass_count: int | None = None

    def __post_init__(self):
        for name in ("dice", "precision", "recall"):
            _check_ratio(name, getattr(self, name), self.degenerate)
        for name in ("dice_thr", "precision_thr", "recall_thr"):
            _check_ratio(name, getattr(self, name), self.degenerate_thr)
        if not 0.0 <= self.excluded_fraction < 1.0:
            raise ValidationError(
                f"excluded_fraction={self.excluded_fraction!r} outside [0, 1)"
            )
        if self.u_avg < 0.0 or not math.isfinite(self.u_avg):
            raise ValidationError(f"u_avg={self.u_avg!r} must be finite and >= 0")
        if self.u_avg_count < 0:
            raise ValidationError("u_avg_count must be >= 0")

    @property
    def u_avg_empty(self) -> bool:
        return self.u_avg_count == 0
