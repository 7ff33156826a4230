"""Seeded test-time-augmentation transforms and their inverse contract.

Geometric transforms (90-degree rotations, horizontal flip) permute pixels
exactly and carry a true inverse; photometric transforms (brightness,
contrast, blur) carry the identity inverse, so probability maps predicted
on photometrically perturbed inputs are aggregated as-is.

Rotations are restricted to multiples of 90 degrees: arbitrary angles have
no exact inverse under resampling, which would corrupt the aggregation of
back-transformed maps.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import convolve1d

from .errors import ValidationError
from .types import BinaryMask, GrayImage, ProbMap


class TransformKind(enum.Enum):
    ROTATE90 = "rotate90"
    HORIZONTAL_FLIP = "horizontal-flip"
    BRIGHTNESS = "brightness"
    CONTRAST = "contrast"
    GAUSSIAN_BLUR = "gaussian-blur"


class Invertibility(enum.Enum):
    GEOMETRIC = "geometric"
    PHOTOMETRIC = "photometric"


_GEOMETRIC = frozenset({TransformKind.ROTATE90, TransformKind.HORIZONTAL_FLIP})

#: parameter name expected per kind (horizontal flip has none)
_PARAM_NAME = {
    TransformKind.ROTATE90: "k",
    TransformKind.BRIGHTNESS: "delta",
    TransformKind.CONTRAST: "factor",
    TransformKind.GAUSSIAN_BLUR: "sigma",
}

Seed = int | tuple[int, ...]


@dataclass(frozen=True)
class ParamRanges:
    """Sampling ranges for the photometric parameters (config-overridable)."""

    brightness_delta: tuple[float, float] = (-0.2, 0.2)
    contrast_factor: tuple[float, float] = (0.7, 1.3)
    blur_sigma: tuple[float, float] = (0.5, 2.0)

    def __post_init__(self):
        for name in ("brightness_delta", "contrast_factor", "blur_sigma"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValidationError(f"{name} range ({lo}, {hi}) must increase")


DEFAULT_RANGES = ParamRanges()


@dataclass(frozen=True)
class TransformRecord:
    """One sampled transform: kind, its parameter, and the seed that drew it."""

    kind: TransformKind
    seed: Seed
    k: int | None = None
    delta: float | None = None
    factor: float | None = None
    sigma: float | None = None
    ranges: ParamRanges = DEFAULT_RANGES

    def __post_init__(self):
        provided = {
            "k": self.k,
            "delta": self.delta,
            "factor": self.factor,
            "sigma": self.sigma,
        }
        expected = _PARAM_NAME.get(self.kind)
        for name, value in provided.items():
            if name == expected:
                if value is None:
                    raise ValidationError(f"{self.kind.value} requires parameter {name!r}")
            elif value is not None:
                raise ValidationError(
                    f"{self.kind.value} does not take parameter {name!r}"
                )
        if self.kind is TransformKind.ROTATE90 and self.k not in (0, 1, 2, 3):
            raise ValidationError(f"rotation quarter-turns must be 0..3, got {self.k}")
        if self.kind is TransformKind.BRIGHTNESS:
            lo, hi = self.ranges.brightness_delta
            if not lo <= self.delta <= hi:
                raise ValidationError(f"brightness delta {self.delta} outside [{lo}, {hi}]")
        if self.kind is TransformKind.CONTRAST:
            lo, hi = self.ranges.contrast_factor
            if not lo <= self.factor <= hi:
                raise ValidationError(f"contrast factor {self.factor} outside [{lo}, {hi}]")
        if self.kind is TransformKind.GAUSSIAN_BLUR:
            lo, hi = self.ranges.blur_sigma
            if not lo <= self.sigma <= hi:
                raise ValidationError(f"blur sigma {self.sigma} outside [{lo}, {hi}]")

    @property
    def invertibility(self) -> Invertibility:
        if self.kind in _GEOMETRIC:
            return Invertibility.GEOMETRIC
        return Invertibility.PHOTOMETRIC


_KIND_ORDER = (
    TransformKind.ROTATE90,
    TransformKind.HORIZONTAL_FLIP,
    TransformKind.BRIGHTNESS,
    TransformKind.CONTRAST,
    TransformKind.GAUSSIAN_BLUR,
)


def sample_transform(seed: Seed, ranges: ParamRanges = DEFAULT_RANGES) -> TransformRecord:
    """Draw one transform, a deterministic function of ``seed``.

    The kind is uniform over the five kinds; parameters are uniform over
    their configured ranges (quarter-turns uniform over {0, 1, 2, 3}).
    """
    rng = np.random.default_rng(seed)
    kind = _KIND_ORDER[int(rng.integers(0, len(_KIND_ORDER)))]
    if kind is TransformKind.ROTATE90:
        return TransformRecord(kind, seed, k=int(rng.integers(0, 4)), ranges=ranges)
    if kind is TransformKind.HORIZONTAL_FLIP:
        return TransformRecord(kind, seed, ranges=ranges)
    if kind is TransformKind.BRIGHTNESS:
        lo, hi = ranges.brightness_delta
        return TransformRecord(kind, seed, delta=float(rng.uniform(lo, hi)), ranges=ranges)
    if kind is TransformKind.CONTRAST:
        lo, hi = ranges.contrast_factor
        return TransformRecord(kind, seed, factor=float(rng.uniform(lo, hi)), ranges=ranges)
    lo, hi = ranges.blur_sigma
    return TransformRecord(kind, seed, sigma=float(rng.uniform(lo, hi)), ranges=ranges)


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalized 1-D Gaussian kernel truncated at 3 sigma; sums to 1."""
    if sigma <= 0:
        raise ValidationError(f"sigma must be positive, got {sigma}")
    radius = max(1, int(math.ceil(3.0 * sigma)))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-0.5 * (x / sigma) ** 2)
    return kernel / kernel.sum()


def apply_geometry(record: TransformRecord, arr: np.ndarray) -> np.ndarray:
    """Apply the exact pixel permutation of a geometric record to an array.

    Works on (H, W) and (H, W, C) arrays; photometric records return the
    array unchanged (their action on pixel positions is the identity).
    """
    if record.kind is TransformKind.ROTATE90:
        return np.rot90(arr, k=record.k, axes=(0, 1)).copy()
    if record.kind is TransformKind.HORIZONTAL_FLIP:
        return arr[:, ::-1].copy()
    return arr


def invert_geometry(record: TransformRecord, arr: np.ndarray) -> np.ndarray:
    """Exact inverse permutation of :func:`apply_geometry`."""
    if record.kind is TransformKind.ROTATE90:
        return np.rot90(arr, k=-record.k, axes=(0, 1)).copy()
    if record.kind is TransformKind.HORIZONTAL_FLIP:
        return arr[:, ::-1].copy()
    return arr


def apply(record: TransformRecord, img: GrayImage) -> GrayImage:
    """Apply a transform to an image.

    Rotations and flips permute pixels exactly (no interpolation);
    brightness adds its delta and clamps to [0, 1]; contrast scales
    deviations around the image mean and clamps; blur convolves with a
    normalized separable Gaussian kernel over reflect-padded borders.
    """
    data = img.data
    if record.kind is TransformKind.ROTATE90 or record.kind is TransformKind.HORIZONTAL_FLIP:
        return GrayImage(apply_geometry(record, data))
    if record.kind is TransformKind.BRIGHTNESS:
        return GrayImage(np.clip(data + record.delta, 0.0, 1.0))
    if record.kind is TransformKind.CONTRAST:
        pivot = data.mean()
        return GrayImage(np.clip(pivot + record.factor * (data - pivot), 0.0, 1.0))
    kernel = gaussian_kernel(record.sigma)
    blurred = convolve1d(data, kernel, axis=0, mode="reflect")
    blurred = convolve1d(blurred, kernel, axis=1, mode="reflect")
    return GrayImage(np.clip(blurred, 0.0, 1.0))


def apply_to_mask(record: TransformRecord, mask: BinaryMask) -> BinaryMask:
    """Move a mask into the transform's output geometry.

    Photometric transforms do not move pixels, so the mask is returned
    unchanged.
    """
    if record.invertibility is Invertibility.GEOMETRIC:
        return BinaryMask(apply_geometry(record, mask.data))
    return mask


def invert(record: TransformRecord, prob_map: ProbMap) -> ProbMap:
    """Map a prediction on the transformed input back to input geometry.

    Geometric records apply the exact inverse pixel permutation to every
    class channel; photometric records are the identity and return the
    map object unchanged, bit for bit.

    Precondition (not checkable from the record alone): the map's shape
    matches the transformed image's shape.
    """
    if record.invertibility is Invertibility.PHOTOMETRIC:
        return prob_map
    return ProbMap(invert_geometry(record, prob_map.data))
