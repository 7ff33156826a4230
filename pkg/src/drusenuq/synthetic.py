"""Deterministic synthetic scene generator and a tunable stochastic mock
predictor.

Scenes imitate layered cross-sectional scans: horizontal intensity bands,
elliptical deposits bulging at band boundaries, and multiplicative speckle.
The mock predictor turns the ground truth's signed boundary distance into
logits, with two independent noise knobs:

* ``sigma_model`` adds per-pass logit noise (stochastic-weights surrogate,
  varies with the pass index at fixed input);
* ``gain`` adds an input-keyed perturbation: zero-mean pseudo-noise drawn
  per pixel from its location and quantized intensity, so any change to
  the input redraws the affected pixels' perturbations. This is what
  makes augmented inputs produce genuinely different predictions while
  identical inputs map to identical outputs.

Being distance-transform based rather than a tiny trained net gives
closed-form control over where errors and uncertainty appear, which is
what makes thresholded evaluation and correlation behaviour testable.

All stochasticity is counter-based (Philox keyed by (seed, pass) for the
per-pass noise; a splitmix-style hash of (seed, position, intensity) for
the input coupling), so volumes are bit-reproducible and independent of
evaluation order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.random import Generator, Philox
from scipy.ndimage import distance_transform_edt
from scipy.special import expit, ndtri

from . import transforms as tfm
from .errors import DrusenOutOfBounds, ShapeMismatch, ValidationError
from .types import BinaryMask, GrayImage, ProbMap, ProbVolume, Provenance

#: band intensities, cycled from the top of the image downward
BAND_LEVELS = (0.15, 0.45, 0.22, 0.55, 0.3)


@dataclass(frozen=True)
class Druse:
    """One elliptical deposit: center (row, col), radii, added brightness."""

    row: int
    col: int
    radius_row: int
    radius_col: int
    amplitude: float = 0.3

    def __post_init__(self):
        if self.radius_row < 1 or self.radius_col < 1:
            raise ValidationError("deposit radii must be >= 1 pixel")
        if not 0.0 < self.amplitude <= 1.0:
            raise ValidationError(f"amplitude {self.amplitude} outside (0, 1]")


@dataclass(frozen=True)
class SceneSpec:
    """Everything needed to render one scene deterministically."""

    shape: tuple[int, int]
    layer_rows: tuple[int, ...]
    drusen: tuple[Druse, ...] = ()
    speckle_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        h, w = self.shape
        if h < 4 or w < 4:
            raise ValidationError(f"scene shape {self.shape} too small")
        rows = tuple(int(r) for r in self.layer_rows)
        if any(b <= a for a, b in zip(rows, rows[1:])):
            raise ValidationError("layer rows must increase strictly")
        if rows and (rows[0] < 1 or rows[-1] >= h):
            raise ValidationError("layer rows must lie inside the image")
        if self.speckle_sigma < 0:
            raise ValidationError("speckle sigma must be >= 0")
        drusen = tuple(self.drusen)
        for d in drusen:
            if (
                d.row - d.radius_row < 0
                or d.row + d.radius_row >= h
                or d.col - d.radius_col < 0
                or d.col + d.radius_col >= w
            ):
                raise DrusenOutOfBounds(
                    f"deposit at ({d.row}, {d.col}) with radii "
                    f"({d.radius_row}, {d.radius_col}) exceeds {h}x{w}"
                )
        object.__setattr__(self, "layer_rows", rows)
        object.__setattr__(self, "drusen", drusen)


def _ellipse(shape: tuple[int, int], d: Druse) -> np.ndarray:
    yy, xx = np.ogrid[: shape[0], : shape[1]]
    return ((yy - d.row) / d.radius_row) ** 2 + ((xx - d.col) / d.radius_col) ** 2 <= 1.0


def generate_scene(spec: SceneSpec) -> tuple[GrayImage, BinaryMask]:
    """Render the scene: banded background, deposit bumps, speckle.

    Deterministic in ``spec.seed``; the mask marks deposit ellipse
    interiors.
    """
    h, w = spec.shape
    img = np.empty((h, w), dtype=np.float64)
    boundaries = (0,) + spec.layer_rows + (h,)
    for band, (top, bottom) in enumerate(zip(boundaries, boundaries[1:])):
        img[top:bottom, :] = BAND_LEVELS[band % len(BAND_LEVELS)]
    mask = np.zeros((h, w), dtype=np.uint8)
    for d in spec.drusen:
        inside = _ellipse(spec.shape, d)
        img[inside] += d.amplitude
        mask[inside] = 1
    if spec.speckle_sigma > 0:
        rng = np.random.default_rng(spec.seed)
        img = img * (1.0 + spec.speckle_sigma * rng.standard_normal((h, w)))
    return GrayImage(np.clip(img, 0.0, 1.0)), BinaryMask(mask)


def sample_scene_spec(
    seed: int,
    shape: tuple[int, int] = (96, 96),
    speckle_sigma: float = 0.1,
    max_drusen: int = 3,
    radius_col_range: tuple[int, int] = (5, 16),
    radius_row_range: tuple[int, int] = (3, 9),
) -> SceneSpec:
    """Draw a randomized scene spec, deterministic in ``seed``.

    Radius ranges are capped so a deposit always fits the scene; scenes too
    small for even the minimum radii are rejected.
    """
    h, w = shape
    rc_lo, rc_hi = radius_col_range
    rr_lo, rr_hi = radius_row_range
    rc_hi = min(rc_hi, w // 2 - 2)
    rr_hi = min(rr_hi, h // 2 - 2)
    if rc_lo > rc_hi or rr_lo > rr_hi:
        raise ValidationError(
            f"scene {h}x{w} cannot fit deposits with radii >= ({rr_lo}, {rc_lo})"
        )
    rng = np.random.default_rng(seed)
    n_layers = int(rng.integers(3, 5))
    rows = np.sort(rng.choice(np.arange(h // 6, h - h // 6), size=n_layers, replace=False))
    drusen = []
    n_drusen = int(rng.integers(1, max_drusen + 1))
    for _ in range(n_drusen):
        rr = int(rng.integers(rr_lo, rr_hi + 1))
        rc = int(rng.integers(rc_lo, rc_hi + 1))
        anchor = int(rng.choice(rows))
        row = int(np.clip(anchor, rr, h - rr - 1))
        col = int(rng.integers(rc, w - rc))
        amp = float(rng.uniform(0.25, 0.4))
        drusen.append(Druse(row=row, col=col, radius_row=rr, radius_col=rc, amplitude=amp))
    return SceneSpec(
        shape=shape,
        layer_rows=tuple(int(r) for r in rows),
        drusen=tuple(drusen),
        speckle_sigma=speckle_sigma,
        seed=seed,
    )


@dataclass(frozen=True)
class MockPredictorSpec:
    """Noise knobs of the mock predictor.

    ``sigma_model``: per-pass logit noise scale (epistemic surrogate).
    ``gain``: sensitivity of logits to the input intensities (aleatoric
    surrogate; drives augmentation variability).
    ``softness``: logit slope vs. signed distance to the ground-truth
    boundary; small values give a hard, confident predictor.
    """

    sigma_model: float = 0.0
    gain: float = 0.0
    softness: float = 1.5
    seed: int = 0

    def __post_init__(self):
        if self.sigma_model < 0:
            raise ValidationError("sigma_model must be >= 0")
        if self.gain < 0:
            raise ValidationError("gain must be >= 0")
        if self.softness <= 0:
            raise ValidationError("softness must be > 0")


def signed_boundary_distance(mask: BinaryMask) -> np.ndarray:
    """Signed Euclidean distance to the mask boundary, positive inside.

    Foreground pixels get +distance to the nearest background pixel,
    background pixels -distance to the nearest foreground pixel, so
    |distance| >= 1 everywhere. All-empty or all-full masks have no
    boundary; they fall back to a uniform +-(h+w) plateau.
    """
    m = mask.data.astype(bool)
    h, w = m.shape
    if not m.any():
        return np.full((h, w), -float(h + w))
    if m.all():
        return np.full((h, w), float(h + w))
    d_in = distance_transform_edt(m)
    d_out = distance_transform_edt(~m)
    return d_in - d_out


def _pass_noise(seed: int, pass_index: int, shape: tuple[int, int]) -> np.ndarray:
    key = np.array([seed, pass_index], dtype=np.uint64)
    return Generator(Philox(key=key)).standard_normal(shape)


_MASK64 = (1 << 64) - 1
#: intensity quantization of the input-keyed perturbation (12-bit)
_INPUT_LEVELS = 4095.0


def input_perturbation(img_data: np.ndarray, seed: int) -> np.ndarray:
    """Zero-mean unit pseudo-noise keyed by pixel location and intensity.

    Each pixel's value is a pure function of (seed, row-major position,
    intensity quantized to 12 bits): perturbing a pixel's intensity in any
    way redraws its noise independently, while untouched pixels keep
    theirs. Implemented as a splitmix-style 64-bit hash fed through the
    normal quantile function.
    """
    h, w = img_data.shape
    q = np.round(img_data * _INPUT_LEVELS).astype(np.uint64)
    pos = np.arange(h, dtype=np.uint64)[:, None] * np.uint64(w) + np.arange(
        w, dtype=np.uint64
    )
    seed_mix = np.uint64((seed * 0x94D049BB133111EB) & _MASK64)
    x = (q * np.uint64(0x9E3779B97F4A7C15)) ^ (pos * np.uint64(0xBF58476D1CE4E5B9)) ^ seed_mix
    x ^= x >> np.uint64(30)
    x *= np.uint64(0xBF58476D1CE4E5B9)
    x ^= x >> np.uint64(27)
    x *= np.uint64(0x94D049BB133111EB)
    x ^= x >> np.uint64(31)
    uniform = (x >> np.uint64(11)).astype(np.float64) * 2.0**-53
    return ndtri(np.clip(uniform, 1e-12, 1.0 - 1e-12))


def mock_predict(
    spec: MockPredictorSpec, img: GrayImage, gt: BinaryMask, pass_index: int
) -> ProbMap:
    """One stochastic forward pass of the mock predictor.

    logit = distance/softness + sigma_model * noise(seed, pass) +
    gain * input_perturbation(image, seed), squashed through the logistic
    function.
    """
    if img.shape != gt.shape:
        raise ShapeMismatch(f"image shape {img.shape} != mask shape {gt.shape}")
    logit = signed_boundary_distance(gt) / spec.softness
    if spec.sigma_model > 0:
        logit = logit + spec.sigma_model * _pass_noise(spec.seed, pass_index, img.shape)
    if spec.gain > 0:
        logit = logit + spec.gain * input_perturbation(img.data, spec.seed)
    p_fg = expit(logit)
    return ProbMap(np.stack([1.0 - p_fg, p_fg], axis=2))


def run_mc(
    spec: MockPredictorSpec, img: GrayImage, gt: BinaryMask, passes: int = 10
) -> ProbVolume:
    """Dropout-style volume: fixed input, pass index varies the noise."""
    if passes < 1:
        raise ValidationError(f"passes must be >= 1, got {passes}")
    maps = [mock_predict(spec, img, gt, t) for t in range(passes)]
    return ProbVolume(tuple(maps), Provenance.MC_DROPOUT)


def run_tta(
    spec: MockPredictorSpec,
    img: GrayImage,
    gt: BinaryMask,
    passes: int = 10,
    tta_seed: int = 0,
    records: tuple | None = None,
    ranges: tfm.ParamRanges = tfm.DEFAULT_RANGES,
) -> ProbVolume:
    """Augmentation volume: fixed weights (pass 0), input varies.

    Each pass transforms the input, predicts against the equally
    transformed ground truth, and back-transforms the map before stacking,
    so every stored map sits in input geometry. Records are drawn from
    (tta_seed, t) unless an explicit sequence is supplied (manifest
    replay).
    """
    if passes < 1:
        raise ValidationError(f"passes must be >= 1, got {passes}")
    if records is None:
        records = tuple(tfm.sample_transform((tta_seed, t), ranges) for t in range(passes))
    else:
        records = tuple(records)
        if len(records) != passes:
            raise ValidationError(f"{len(records)} records for {passes} passes")
    maps = []
    for rec in records:
        timg = tfm.apply(rec, img)
        tgt = tfm.apply_to_mask(rec, gt)
        pm = mock_predict(spec, timg, tgt, pass_index=0)
        maps.append(tfm.invert(rec, pm))
    return ProbVolume(tuple(maps), Provenance.TTA, transforms=records)
