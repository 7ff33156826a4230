"""Rendering of segmentation overlays and uncertainty heatmaps to PNG.

The heatmap colormap is a fixed 256-entry table built from five anchor
colors (black, deep violet, crimson, amber, pale yellow) by linear
interpolation; it is versioned with the code so rendered goldens are
stable across platforms. Entropy is scaled against the map's theoretical
maximum (log_base of the class count), not the data maximum, so a zero
map renders as the floor color and a saturated map as the ceiling color.
"""

from __future__ import annotations

import numpy as np
from PIL import Image

from .errors import IoFailure, ShapeMismatch
from .types import BinaryMask, EntropyMap, GrayImage

#: (position in [0, 1], (r, g, b)) anchors of the heatmap ramp, version 1
HEATMAP_ANCHORS = (
    (0.00, (0, 0, 0)),
    (0.25, (70, 20, 110)),
    (0.50, (190, 45, 60)),
    (0.75, (245, 150, 30)),
    (1.00, (255, 250, 210)),
)

#: 50/50 blend targets for overlay marking
GT_COLOR = (0, 216, 0)
PRED_COLOR = (216, 0, 0)
BOTH_COLOR = (216, 216, 0)


def _build_lut() -> np.ndarray:
    lut = np.zeros((256, 3), dtype=np.uint8)
    positions = np.array([p for p, _ in HEATMAP_ANCHORS])
    colors = np.array([c for _, c in HEATMAP_ANCHORS], dtype=np.float64)
    t = np.linspace(0.0, 1.0, 256)
    for ch in range(3):
        lut[:, ch] = np.round(np.interp(t, positions, colors[:, ch])).astype(np.uint8)
    return lut


HEATMAP_LUT = _build_lut()


def _save_rgb(path, rgb: np.ndarray) -> None:
    try:
        Image.fromarray(rgb, mode="RGB").save(path, format="PNG")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def overlay_array(img: GrayImage, gt: BinaryMask, pred: BinaryMask) -> np.ndarray:
    """RGB array: grayscale base with gt/pred/both pixels color-blended."""
    if img.shape != gt.shape or img.shape != pred.shape:
        raise ShapeMismatch(
            f"shapes differ: image {img.shape}, gt {gt.shape}, pred {pred.shape}"
        )
    gray = np.round(img.data * 255.0).astype(np.uint16)
    rgb = np.stack([gray, gray, gray], axis=2)
    g = gt.data.astype(bool)
    p = pred.data.astype(bool)
    for sel, color in ((g & ~p, GT_COLOR), (p & ~g, PRED_COLOR), (g & p, BOTH_COLOR)):
        for ch in range(3):
            channel = rgb[:, :, ch]
            channel[sel] = (channel[sel] + color[ch]) // 2
    return rgb.astype(np.uint8)


def render_overlay(img: GrayImage, gt: BinaryMask, pred: BinaryMask, path) -> None:
    """Write the ground-truth / prediction overlay as an RGB PNG."""
    _save_rgb(path, overlay_array(img, gt, pred))


def heatmap_array(ent: EntropyMap) -> np.ndarray:
    """RGB array mapping [0, max entropy] through the fixed ramp."""
    t = ent.data / ent.max_value
    idx = np.clip(np.round(t * 255.0), 0, 255).astype(np.intp)
    return HEATMAP_LUT[idx]


def render_heatmap(ent: EntropyMap, path) -> None:
    """Write the uncertainty heatmap as an RGB PNG."""
    _save_rgb(path, heatmap_array(ent))
