"""Run reports: per-image score rows, dataset aggregates, correlation
summaries, and their CSV/JSON carriers.

Method labels are fixed strings ("no-uncertainty", "epistemic",
"aleatoric" and their "-thresholded" variants); downstream tables key on
them byte-for-byte. NaN scores (degenerate empty-mask cases) are kept in
rows but skipped by aggregates so dataset means stay honest.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, fields

from .errors import DegenerateSeries, MalformedHeader, IoFailure, ValidationError
from .evaluation import pearson
from .types import EvalReport

METHOD_NO_UNCERTAINTY = "no-uncertainty"
METHOD_EPISTEMIC = "epistemic"
METHOD_ALEATORIC = "aleatoric"
BASE_METHODS = (METHOD_NO_UNCERTAINTY, METHOD_EPISTEMIC, METHOD_ALEATORIC)


def thresholded_label(method: str) -> str:
    return f"{method}-thresholded"


METHOD_LABELS = BASE_METHODS + tuple(
    thresholded_label(m) for m in (METHOD_EPISTEMIC, METHOD_ALEATORIC)
)

REPORT_SCHEMA_VERSION = 1

AGGREGATE_ID = "aggregate"
SIZE_ALL = "all"
_SIZE_ORDER = {"large": 0, "medium": 1, "small": 2, SIZE_ALL: 3, "": 4}


@dataclass(frozen=True)
class ReportRow:
    image_id: str
    method: str
    size_class: str
    dice: float
    precision: float
    recall: float
    u_avg: float | None
    excluded_fraction: float | None
    n_images: int = 1

    def __post_init__(self):
        if self.method not in METHOD_LABELS:
            raise ValidationError(f"unknown method label {self.method!r}")


def rows_from_report(image_id: str, method: str, report: EvalReport) -> list[ReportRow]:
    """Expand one evaluation into its table rows.

    Uncertainty methods get a plain row and a "-thresholded" row; the
    no-uncertainty method gets a single row with no uncertainty columns.
    """
    if method not in BASE_METHODS:
        raise ValidationError(f"method must be one of {BASE_METHODS}, got {method!r}")
    size = report.size_class.value if report.size_class is not None else ""
    with_uncertainty = method != METHOD_NO_UNCERTAINTY
    rows = [
        ReportRow(
            image_id=image_id,
            method=method,
            size_class=size,
            dice=report.dice,
            precision=report.precision,
            recall=report.recall,
            u_avg=report.u_avg if with_uncertainty else None,
            excluded_fraction=0.0 if with_uncertainty else None,
        )
    ]
    if with_uncertainty:
        rows.append(
            ReportRow(
                image_id=image_id,
                method=thresholded_label(method),
                size_class=size,
                dice=report.dice_thr,
                precision=report.precision_thr,
                recall=report.recall_thr,
                u_avg=report.u_avg,
                excluded_fraction=report.excluded_fraction,
            )
        )
    return rows


def _clean_mean(values) -> float:
    vals = [v for v in values if v is not None and not math.isnan(v)]
    return sum(vals) / len(vals) if vals else math.nan


def aggregate_rows(rows: list[ReportRow]) -> list[ReportRow]:
    """Dataset aggregate rows: mean scores per (method, size class).

    Emits one row per observed (method, size class) pair plus an
    all-sizes row per method; NaN and missing values are skipped, and the
    contributing image count is recorded in ``n_images``.
    """
    per_image = [r for r in rows if r.image_id != AGGREGATE_ID]
    groups: dict[tuple[str, str], list[ReportRow]] = {}
    for row in per_image:
        groups.setdefault((row.method, row.size_class), []).append(row)
        groups.setdefault((row.method, SIZE_ALL), []).append(row)
    out = []
    order = sorted(
        groups,
        key=lambda key: (METHOD_LABELS.index(key[0]), _SIZE_ORDER.get(key[1], 99), key[1]),
    )
    for method, size in order:
        members = groups[(method, size)]
        has_u = any(r.u_avg is not None for r in members)
        has_x = any(r.excluded_fraction is not None for r in members)
        out.append(
            ReportRow(
                image_id=AGGREGATE_ID,
                method=method,
                size_class=size,
                dice=_clean_mean(r.dice for r in members),
                precision=_clean_mean(r.precision for r in members),
                recall=_clean_mean(r.recall for r in members),
                u_avg=_clean_mean(r.u_avg for r in members) if has_u else None,
                excluded_fraction=(
                    _clean_mean(r.excluded_fraction for r in members) if has_x else None
                ),
                n_images=len(members),
            )
        )
    return out


# ---------------------------------------------------------------------------
# CSV / JSON carriers

_FIELDS = [f.name for f in fields(ReportRow)]


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_report_csv(path, rows: list[ReportRow]) -> None:
    try:
        with open(path, "w", newline="", encoding="ascii") as fh:
            writer = csv.writer(fh)
            writer.writerow(_FIELDS)
            for row in rows:
                writer.writerow([_cell(getattr(row, name)) for name in _FIELDS])
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_report_csv(path) -> list[ReportRow]:
    try:
        with open(path, newline="", encoding="ascii") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != _FIELDS:
                raise MalformedHeader(f"{path}: unexpected report columns {header!r}")
            rows = []
            for raw in reader:
                if len(raw) != len(_FIELDS):
                    raise MalformedHeader(f"{path}: ragged row {raw!r}")
                rec = dict(zip(_FIELDS, raw))
                rows.append(
                    ReportRow(
                        image_id=rec["image_id"],
                        method=rec["method"],
                        size_class=rec["size_class"],
                        dice=float(rec["dice"]),
                        precision=float(rec["precision"]),
                        recall=float(rec["recall"]),
                        u_avg=float(rec["u_avg"]) if rec["u_avg"] else None,
                        excluded_fraction=(
                            float(rec["excluded_fraction"]) if rec["excluded_fraction"] else None
                        ),
                        n_images=int(rec["n_images"]),
                    )
                )
            return rows
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc


def _json_value(value):
    if isinstance(value, float) and math.isnan(value):
        return None
    return value


def _json_float(value, allow_none_as_nan: bool):
    if value is None and allow_none_as_nan:
        return math.nan
    return value


def write_report_json(path, rows: list[ReportRow]) -> None:
    doc = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "rows": [
            {name: _json_value(getattr(row, name)) for name in _FIELDS} for row in rows
        ],
    }
    try:
        with open(path, "w", encoding="ascii") as fh:
            json.dump(doc, fh, indent=2, allow_nan=False)
            fh.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_report_json(path) -> list[ReportRow]:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise MalformedHeader(f"{path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("schema_version") != REPORT_SCHEMA_VERSION:
        raise MalformedHeader(f"{path}: unknown report schema")
    rows = []
    for rec in doc.get("rows", []):
        # dice/precision/recall are never absent, only NaN (serialized null)
        rows.append(
            ReportRow(
                image_id=rec["image_id"],
                method=rec["method"],
                size_class=rec["size_class"],
                dice=_json_float(rec["dice"], True),
                precision=_json_float(rec["precision"], True),
                recall=_json_float(rec["recall"], True),
                u_avg=rec.get("u_avg"),
                excluded_fraction=rec.get("excluded_fraction"),
                n_images=int(rec.get("n_images", 1)),
            )
        )
    return rows


# ---------------------------------------------------------------------------
# Correlation analysis (uncertainty vs. accuracy)


def correlation_summary(rows: list[ReportRow]) -> list[dict]:
    """Pearson correlation of (u_avg, dice) per method and size class.

    Uses per-image rows of the plain uncertainty methods (thresholded rows
    rank the same images, so they are skipped). Degenerate groups (too few
    points, constant series) get a null coefficient with a note.
    """
    usable = [
        r
        for r in rows
        if r.image_id != AGGREGATE_ID
        and r.method in (METHOD_EPISTEMIC, METHOD_ALEATORIC)
        and r.u_avg is not None
        and not math.isnan(r.dice)
    ]
    groups: dict[tuple[str, str], list[ReportRow]] = {}
    for row in usable:
        groups.setdefault((row.method, row.size_class), []).append(row)
        groups.setdefault((row.method, SIZE_ALL), []).append(row)
    out = []
    order = sorted(
        groups,
        key=lambda key: (METHOD_LABELS.index(key[0]), _SIZE_ORDER.get(key[1], 99), key[1]),
    )
    for method, size in order:
        members = groups[(method, size)]
        entry = {
            "method": method,
            "size_class": size,
            "n": len(members),
            "pcc": None,
            "note": "",
        }
        try:
            entry["pcc"] = pearson(
                [r.u_avg for r in members], [r.dice for r in members]
            )
        except DegenerateSeries as exc:
            entry["note"] = str(exc)
        out.append(entry)
    return out


def write_correlation_json(path, summary: list[dict]) -> None:
    doc = {"schema_version": REPORT_SCHEMA_VERSION, "correlations": summary}
    try:
        with open(path, "w", encoding="ascii") as fh:
            json.dump(doc, fh, indent=2, allow_nan=False)
            fh.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def write_scatter_csv(path, rows: list[ReportRow]) -> None:
    """Scatter-plot data table: one (u_avg, dice) point per image."""
    usable = [
        r
        for r in rows
        if r.image_id != AGGREGATE_ID
        and r.method in (METHOD_EPISTEMIC, METHOD_ALEATORIC)
        and r.u_avg is not None
        and not math.isnan(r.dice)
    ]
    try:
        with open(path, "w", newline="", encoding="ascii") as fh:
            writer = csv.writer(fh)
            writer.writerow(["image_id", "method", "size_class", "u_avg", "dice"])
            for r in usable:
                writer.writerow(
                    [r.image_id, r.method, r.size_class, repr(r.u_avg), repr(r.dice)]
                )
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
