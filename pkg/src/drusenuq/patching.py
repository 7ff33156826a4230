"""Multi-window patch extraction and overlap-averaged stitching.

Grids step by a fixed stride and snap the last anchor per axis inward so
every window lies fully inside the image and every source pixel is covered
at least once. Border handling is by anchor snapping (overlap), never by
padding: fabricated intensities are unacceptable in a noise-sensitive
modality.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CountMismatch, ShapeMismatch, ValidationError, WindowTooLarge
from .types import GrayImage, ProbMap

ALLOWED_WINDOWS = (128, 192, 256)


def _axis_anchors(length: int, window: int, stride: int) -> tuple[int, ...]:
    anchors = list(range(0, length - window + 1, stride))
    if anchors[-1] != length - window:
        anchors.append(length - window)
    return tuple(anchors)


@dataclass(frozen=True)
class PatchGrid:
    """Anchors of a sliding-window tiling over a source shape."""

    window: int
    stride: int
    origins: tuple
    source_shape: tuple[int, int]

    def __post_init__(self):
        if self.window not in ALLOWED_WINDOWS:
            raise ValidationError(
                f"window must be one of {ALLOWED_WINDOWS}, got {self.window}"
            )
        if not 1 <= self.stride <= self.window:
            raise ValidationError(
                f"stride must be in [1, window], got {self.stride} for window {self.window}"
            )
        h, w = self.source_shape
        origins = tuple((int(r), int(c)) for r, c in self.origins)
        if not origins:
            raise ValidationError("a grid needs at least one origin")
        for r, c in origins:
            if r < 0 or c < 0 or r + self.window > h or c + self.window > w:
                raise ValidationError(
                    f"origin ({r}, {c}) places a {self.window}px window outside {h}x{w}"
                )
        rows = sorted(set(r for r, _ in origins))
        cols = sorted(set(c for _, c in origins))
        if set(origins) != {(r, c) for r in rows for c in cols} or len(origins) != len(
            rows
        ) * len(cols):
            raise ValidationError("origins must form a full row x column grid")
        for anchors, length in ((rows, h), (cols, w)):
            if anchors[0] != 0 or anchors[-1] + self.window != length:
                raise ValidationError("grid does not reach the image borders")
            for a, b in zip(anchors, anchors[1:]):
                if b - a > self.window:
                    raise ValidationError(f"coverage gap between anchors {a} and {b}")
        object.__setattr__(self, "origins", origins)
        object.__setattr__(self, "source_shape", (int(h), int(w)))


def plan_grid(height: int, width: int, window: int, stride: int | None = None) -> PatchGrid:
    """Plan a full-coverage grid of ``window``-sized patches.

    Anchors step by ``stride`` (defaults to the window, i.e. no overlap);
    the final anchor per axis is snapped to ``length - window`` so border
    pixels are always covered.
    """
    if stride is None:
        stride = window
    if window not in ALLOWED_WINDOWS:
        raise ValidationError(f"window must be one of {ALLOWED_WINDOWS}, got {window}")
    if not 1 <= stride <= window:
        raise ValidationError(f"stride must be in [1, window], got {stride}")
    if window > min(height, width):
        raise WindowTooLarge(
            f"window {window} exceeds image extent {height}x{width}"
        )
    rows = _axis_anchors(height, window, stride)
    cols = _axis_anchors(width, window, stride)
    origins = tuple((r, c) for r in rows for c in cols)
    return PatchGrid(window=window, stride=stride, origins=origins, source_shape=(height, width))


def extract(img: GrayImage, grid: PatchGrid) -> list[GrayImage]:
    """Bit-exact crops of the image, one per grid origin."""
    if img.shape != grid.source_shape:
        raise ShapeMismatch(
            f"grid planned for {grid.source_shape}, image is {img.shape}"
        )
    w = grid.window
    return [GrayImage(img.data[r : r + w, c : c + w]) for r, c in grid.origins]


def extract_map(prob_map: ProbMap, grid: PatchGrid) -> list[ProbMap]:
    """Window-sized crops of a probability map, one per grid origin."""
    if prob_map.shape != grid.source_shape:
        raise ShapeMismatch(
            f"grid planned for {grid.source_shape}, map is {prob_map.shape}"
        )
    w = grid.window
    return [ProbMap(prob_map.data[r : r + w, c : c + w]) for r, c in grid.origins]


def stitch(patches: list[ProbMap], grid: PatchGrid) -> ProbMap:
    """Reassemble window-sized maps into a whole-image map.

    Each source pixel takes the mean over all covering patches, then the
    class vector is renormalized to sum to exactly 1 (pre-normalization
    drift stays within the per-pixel validation tolerance). Accumulation
    runs in a canonical order (origins sorted row-major), so stitching is
    invariant under simultaneous permutations of (patch, origin) pairs.
    """
    if len(patches) != len(grid.origins):
        raise CountMismatch(
            f"{len(patches)} patches for {len(grid.origins)} grid origins"
        )
    w = grid.window
    classes = patches[0].classes
    for p in patches:
        if p.data.shape != (w, w, classes):
            raise ShapeMismatch(
                f"patch shape {p.data.shape} != expected ({w}, {w}, {classes})"
            )
    h, wid = grid.source_shape
    total = np.zeros((h, wid, classes), dtype=np.float64)
    cover = np.zeros((h, wid, 1), dtype=np.float64)
    order = sorted(range(len(patches)), key=lambda i: grid.origins[i])
    for i in order:
        r, c = grid.origins[i]
        total[r : r + w, c : c + w] += patches[i].data
        cover[r : r + w, c : c + w] += 1.0
    mean = total / cover
    return ProbMap(mean / mean.sum(axis=2, keepdims=True))
