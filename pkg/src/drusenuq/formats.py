"""Exchange file formats: NPY tensors, PGM/PNG rasters, TTA manifests.

Tensor files store float32 (common export practice); everything is widened
to float64 on load. Masks and tensors round-trip losslessly; grayscale
images are quantized to their declared bit depth. A volume file tolerates
per-pixel class sums within 1e-5 (external softmax exports); pixels whose
sum drifts beyond the in-memory 1e-6 tolerance are renormalized on load,
which never triggers for files this package wrote itself.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import (
    IoFailure,
    MalformedHeader,
    MalformedMask,
    ShapeMismatch,
    SumNotOne,
    UnsupportedDtype,
    ValidationError,
)
from .transforms import Invertibility, ParamRanges, TransformKind, TransformRecord
from .types import BinaryMask, GrayImage, ProbMap, ProbVolume, Provenance

VOLUME_SUM_TOL = 1e-5
_RENORM_TOL = 1e-6

MANIFEST_SCHEMA_VERSION = 1

_PARAM_KEY = {
    TransformKind.ROTATE90: "k",
    TransformKind.HORIZONTAL_FLIP: None,
    TransformKind.BRIGHTNESS: "delta",
    TransformKind.CONTRAST: "factor",
    TransformKind.GAUSSIAN_BLUR: "sigma",
}


# ---------------------------------------------------------------------------
# NPY tensors


def _load_npy(path) -> np.ndarray:
    try:
        with open(path, "rb") as fh:
            return np.load(fh, allow_pickle=False)
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise MalformedHeader(f"{path}: {exc}") from exc


def _save_npy(path, arr: np.ndarray) -> None:
    try:
        with open(path, "wb") as fh:
            np.save(fh, np.ascontiguousarray(arr))
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _check_float(arr: np.ndarray, path, lenient: bool) -> np.ndarray:
    if arr.dtype == np.float32:
        return arr.astype(np.float64)
    if lenient and arr.dtype == np.float64:
        return arr
    raise UnsupportedDtype(
        f"{path}: dtype {arr.dtype} not supported (expected float32"
        + (" or float64" if lenient else "; pass lenient to widen float64")
        + ")"
    )


def _renormalize(data: np.ndarray, path, t: int | None) -> np.ndarray:
    """Enforce the in-memory per-pixel sum tolerance on file-borne maps."""
    sums = data.sum(axis=2)
    err = np.abs(sums - 1.0)
    worst = float(err.max())
    if worst > VOLUME_SUM_TOL:
        pixel = int(np.argmax(err))
        where = f"pass {t}, " if t is not None else ""
        raise SumNotOne(pixel, float(sums.ravel()[pixel]))
    if worst > _RENORM_TOL:
        fix = err > _RENORM_TOL
        data = data.copy()
        data[fix] /= sums[fix][:, None]
    return data


def write_volume(path, volume: ProbVolume) -> None:
    """Write a [T, C, H, W] little-endian float32 NPY v1.0 file."""
    stack = volume.stack()  # (T, H, W, C) float64
    arr = np.transpose(stack, (0, 3, 1, 2)).astype(np.float32)
    _save_npy(path, arr)


def read_volume(
    path,
    lenient: bool = False,
    provenance: Provenance = Provenance.EXTERNAL,
    transforms: tuple | None = None,
) -> ProbVolume:
    """Load a [T, C, H, W] volume, validating header, dtype, and sums."""
    arr = _load_npy(path)
    if arr.ndim != 4:
        raise ShapeMismatch(f"{path}: expected [T, C, H, W], got shape {arr.shape}")
    arr = _check_float(arr, path, lenient)
    if arr.shape[1] < 2:
        raise ValidationError(f"{path}: need at least 2 classes, got {arr.shape[1]}")
    maps = []
    for t in range(arr.shape[0]):
        data = np.transpose(arr[t], (1, 2, 0))
        maps.append(ProbMap(_renormalize(data, path, t)))
    return ProbVolume(tuple(maps), provenance, transforms=transforms)


def write_prob_map(path, prob_map: ProbMap) -> None:
    """Write a single map as a [C, H, W] float32 NPY file."""
    _save_npy(path, np.transpose(prob_map.data, (2, 0, 1)).astype(np.float32))


def read_prob_map(path, lenient: bool = False) -> ProbMap:
    arr = _load_npy(path)
    if arr.ndim != 3:
        raise ShapeMismatch(f"{path}: expected [C, H, W], got shape {arr.shape}")
    arr = _check_float(arr, path, lenient)
    if arr.shape[0] < 2:
        raise ValidationError(f"{path}: need at least 2 classes, got {arr.shape[0]}")
    data = np.transpose(arr, (1, 2, 0))
    return ProbMap(_renormalize(data, path, None))


def write_entropy(path, values: np.ndarray) -> None:
    """Write an [H, W] float32 entropy raster."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeMismatch(f"expected [H, W] entropy values, got shape {arr.shape}")
    _save_npy(path, arr.astype(np.float32))


def read_entropy(path, lenient: bool = False) -> np.ndarray:
    arr = _load_npy(path)
    if arr.ndim != 2:
        raise ShapeMismatch(f"{path}: expected [H, W], got shape {arr.shape}")
    return _check_float(arr, path, lenient)


# ---------------------------------------------------------------------------
# PGM grayscale images (P5, binary; 16-bit is big-endian per Netpbm)


def write_pgm(path, img: GrayImage, bit_depth: int = 8) -> None:
    if bit_depth not in (8, 16):
        raise ValidationError(f"bit depth must be 8 or 16, got {bit_depth}")
    maxval = (1 << bit_depth) - 1
    quantized = np.round(img.data * maxval).astype(np.uint16 if bit_depth == 16 else np.uint8)
    header = f"P5\n{img.width} {img.height}\n{maxval}\n".encode("ascii")
    payload = quantized.astype(">u2").tobytes() if bit_depth == 16 else quantized.tobytes()
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(payload)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _pgm_tokens(blob: bytes, count: int) -> tuple[list[bytes], int]:
    """First ``count`` whitespace-separated tokens, skipping # comments.

    Returns the tokens and the offset one whitespace byte past the last
    token (the start of the binary payload).
    """
    tokens: list[bytes] = []
    i = 0
    n = len(blob)
    while len(tokens) < count and i < n:
        c = blob[i : i + 1]
        if c.isspace():
            i += 1
            continue
        if c == b"#":
            while i < n and blob[i : i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        start = i
        while i < n and not blob[i : i + 1].isspace():
            i += 1
        tokens.append(blob[start:i])
    if len(tokens) < count or i >= n:
        raise MalformedHeader("truncated PGM header")
    return tokens, i + 1  # consume the single whitespace after the last token


def read_pgm(path) -> GrayImage:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    tokens, offset = _pgm_tokens(blob, 4)
    if tokens[0] != b"P5":
        raise MalformedHeader(f"{path}: not a binary PGM (magic {tokens[0]!r})")
    try:
        width, height, maxval = (int(t) for t in tokens[1:4])
    except ValueError as exc:
        raise MalformedHeader(f"{path}: non-numeric PGM header field") from exc
    if width < 1 or height < 1 or maxval < 1 or maxval > 65535:
        raise MalformedHeader(f"{path}: invalid PGM dimensions/maxval")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    expected = width * height * dtype.itemsize
    payload = blob[offset : offset + expected]
    if len(payload) != expected:
        raise MalformedHeader(f"{path}: payload has {len(payload)} bytes, expected {expected}")
    raw = np.frombuffer(payload, dtype=dtype).reshape(height, width)
    if raw.max(initial=0) > maxval:
        raise MalformedHeader(f"{path}: sample value exceeds maxval {maxval}")
    return GrayImage(raw.astype(np.float64) / maxval)


# ---------------------------------------------------------------------------
# PNG grayscale images and masks (via Pillow)


def write_png_image(path, img: GrayImage, bit_depth: int = 8) -> None:
    if bit_depth not in (8, 16):
        raise ValidationError(f"bit depth must be 8 or 16, got {bit_depth}")
    maxval = (1 << bit_depth) - 1
    quantized = np.round(img.data * maxval)
    try:
        if bit_depth == 8:
            Image.fromarray(quantized.astype(np.uint8), mode="L").save(path, format="PNG")
        else:
            # uint16 arrays map to 16-bit grayscale ("I;16") automatically
            Image.fromarray(quantized.astype(np.uint16)).save(path, format="PNG")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_png_image(path) -> GrayImage:
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            arr = np.asarray(im)
    except FileNotFoundError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    except OSError as exc:
        raise MalformedHeader(f"{path}: {exc}") from exc
    if mode == "L":
        return GrayImage(arr.astype(np.float64) / 255.0)
    if mode in ("I;16", "I"):
        if arr.min(initial=0) < 0 or arr.max(initial=0) > 65535:
            raise MalformedHeader(f"{path}: 16-bit sample out of range")
        return GrayImage(arr.astype(np.float64) / 65535.0)
    raise UnsupportedDtype(f"{path}: unsupported PNG mode {mode!r} for grayscale")


def write_mask(path, mask: BinaryMask) -> None:
    """Write a mask as an 8-bit grayscale PNG with values {0, 255}."""
    try:
        Image.fromarray(mask.data * np.uint8(255), mode="L").save(path, format="PNG")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_mask(path) -> BinaryMask:
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            arr = np.asarray(im)
    except FileNotFoundError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    except OSError as exc:
        raise MalformedHeader(f"{path}: {exc}") from exc
    if mode != "L":
        raise MalformedMask(f"{path}: masks must be 8-bit grayscale, got mode {mode!r}")
    values = np.unique(arr)
    bad = values[~np.isin(values, (0, 255))]
    if bad.size:
        raise MalformedMask(f"{path}: mask contains value {int(bad[0])}, expected 0/255")
    return BinaryMask((arr == 255).astype(np.uint8))


# ---------------------------------------------------------------------------
# TTA manifests


def _seed_to_json(seed):
    return list(seed) if isinstance(seed, tuple) else seed


def _seed_from_json(seed):
    return tuple(seed) if isinstance(seed, list) else seed


def record_to_dict(record: TransformRecord) -> dict:
    entry = {
        "kind": record.kind.value,
        "invertibility": record.invertibility.value,
        "seed": _seed_to_json(record.seed),
    }
    key = _PARAM_KEY[record.kind]
    if key is not None:
        entry[key] = getattr(record, key)
    return entry


def record_from_dict(entry: dict, ranges: ParamRanges | None = None) -> TransformRecord:
    try:
        kind = TransformKind(entry["kind"])
        seed = _seed_from_json(entry["seed"])
    except (KeyError, ValueError) as exc:
        raise MalformedHeader(f"bad transform entry {entry!r}: {exc}") from exc
    kwargs = {}
    key = _PARAM_KEY[kind]
    if key is not None:
        if key not in entry:
            raise MalformedHeader(f"transform entry {entry!r} missing parameter {key!r}")
        kwargs[key] = entry[key]
    if ranges is not None:
        kwargs["ranges"] = ranges
    record = TransformRecord(kind, seed, **kwargs)
    declared = entry.get("invertibility")
    if declared is not None and Invertibility(declared) is not record.invertibility:
        raise MalformedHeader(
            f"transform {kind.value} declares invertibility {declared!r}, "
            f"expected {record.invertibility.value!r}"
        )
    return record


def write_manifest(path, records, image_id: str) -> None:
    """Write the ordered transform sequence of a TTA run as JSON."""
    records = tuple(records)
    doc = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "image_id": image_id,
        "passes": len(records),
        "transforms": [record_to_dict(r) for r in records],
    }
    try:
        Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="ascii")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_manifest(path, ranges: ParamRanges | None = None) -> tuple[tuple, str]:
    """Load a TTA manifest; returns (records, image_id)."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise MalformedHeader(f"{path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("schema_version") != MANIFEST_SCHEMA_VERSION:
        raise MalformedHeader(f"{path}: unknown manifest schema")
    entries = doc.get("transforms")
    if not isinstance(entries, list) or doc.get("passes") != len(entries):
        raise MalformedHeader(f"{path}: transform count does not match declared passes")
    records = tuple(record_from_dict(e, ranges) for e in entries)
    return records, str(doc.get("image_id", ""))
