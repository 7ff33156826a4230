"""Command-line pipeline: synth -> quantify -> evaluate -> correlate, plus
render for overlays and heatmaps.

All commands are deterministic: the same inputs and seeds produce
byte-identical output files. Batch conventions: an image's artifacts share
a trailing numeric id (img_000.pgm, gt_000.png, mc_000.npy, ...), and
quantify writes <stem>.mean.npy, <stem>.entropy.npy, <stem>.uncertainty.json
next to each other so evaluate can pick them up by id.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import formats, render, reporting
from .errors import DrusenUQError, ValidationError
from .evaluation import (
    DEFAULT_EXCLUDE_FRACTION,
    ThresholdPolicy,
    binarize,
    thresholded_eval,
    tertile_thresholds,
)
from .patching import ALLOWED_WINDOWS, plan_grid
from .synthetic import MockPredictorSpec, generate_scene, run_mc, run_tta, sample_scene_spec
from .types import BinaryMask, EntropyMap, ProbMap, Provenance, SizeThresholds
from .uncertainty import aggregate_passes, average_drusen_uncertainty, entropy_map

DEFAULT_PASSES = 10

INDEX_NAME = "index.json"


def _derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(tuple(parts)).generate_state(1)[0])


def _image_id(stem: str) -> str:
    return stem.rsplit("_", 1)[-1]


# ---------------------------------------------------------------------------
# synth


def _cmd_synth(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    shape = (args.height, args.width)
    entries = []
    for i in range(args.count):
        sid = f"{i:03d}"
        scene = sample_scene_spec(
            _derive_seed(args.seed, i, 0), shape=shape, speckle_sigma=args.speckle
        )
        img, gt = generate_scene(scene)
        predictor = MockPredictorSpec(
            sigma_model=args.sigma_model,
            gain=args.gain,
            softness=args.softness,
            seed=_derive_seed(args.seed, i, 1),
        )
        mc = run_mc(predictor, img, gt, passes=args.passes)
        tta = run_tta(predictor, img, gt, passes=args.passes, tta_seed=_derive_seed(args.seed, i, 2))

        formats.write_pgm(out / f"img_{sid}.pgm", img)
        formats.write_mask(out / f"gt_{sid}.png", gt)
        formats.write_volume(out / f"mc_{sid}.npy", mc)
        formats.write_volume(out / f"tta_{sid}.npy", tta)
        formats.write_manifest(out / f"tta_{sid}.json", tta.transforms, image_id=sid)
        entries.append(
            {
                "id": sid,
                "image": f"img_{sid}.pgm",
                "mask": f"gt_{sid}.png",
                "mc_volume": f"mc_{sid}.npy",
                "tta_volume": f"tta_{sid}.npy",
                "tta_manifest": f"tta_{sid}.json",
                "drusen_pixels": gt.foreground_count(),
            }
        )
    index = {
        "schema_version": 1,
        "count": args.count,
        "seed": args.seed,
        "passes": args.passes,
        "sigma_model": args.sigma_model,
        "gain": args.gain,
        "softness": args.softness,
        "speckle": args.speckle,
        "shape": [args.height, args.width],
        "images": entries,
    }
    (out / INDEX_NAME).write_text(json.dumps(index, indent=2) + "\n", encoding="ascii")
    print(f"wrote {args.count} scenes to {out}")
    return 0


# ---------------------------------------------------------------------------
# quantify


def _quantify_one(volume_path: Path, args, out_dir: Path) -> None:
    transforms = None
    provenance = Provenance.MC_DROPOUT
    if args.mode == "tta":
        provenance = Provenance.TTA
        manifest = Path(args.manifest) if args.manifest else volume_path.with_suffix(".json")
        if not manifest.exists():
            raise ValidationError(f"tta mode needs a manifest; {manifest} not found")
        transforms, _ = formats.read_manifest(manifest)
    volume = formats.read_volume(
        volume_path, lenient=args.lenient, provenance=provenance, transforms=transforms
    )
    if volume.passes != args.passes:
        raise ValidationError(
            f"{volume_path}: volume has {volume.passes} passes, expected {args.passes}"
        )
    mean = aggregate_passes(volume)
    base = 2.0 if args.log_base == "2" else math.e
    ent = entropy_map(mean, base=base)
    u_avg, n_sel = average_drusen_uncertainty(mean, ent)

    stem = volume_path.stem
    formats.write_prob_map(out_dir / f"{stem}.mean.npy", mean)
    formats.write_entropy(out_dir / f"{stem}.entropy.npy", ent.data)
    summary = {
        "schema_version": 1,
        "image_id": _image_id(stem),
        "mode": args.mode,
        "passes": volume.passes,
        "log_base": args.log_base,
        "n_classes": volume.classes,
        "u_avg": u_avg,
        "u_avg_count": n_sel,
        "u_avg_empty": n_sel == 0,
    }
    (out_dir / f"{stem}.uncertainty.json").write_text(
        json.dumps(summary, indent=2) + "\n", encoding="ascii"
    )


def _cmd_quantify(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.volume:
        volumes = [Path(v) for v in args.volume]
    else:
        if not args.in_dir:
            raise ValidationError("pass --volume files or an --in-dir to scan")
        prefix = "mc_" if args.mode == "mc" else "tta_"
        volumes = sorted(Path(args.in_dir).glob(f"{prefix}*.npy"))
        if not volumes:
            raise ValidationError(f"no {prefix}*.npy volumes under {args.in_dir}")
    for volume_path in volumes:
        _quantify_one(volume_path, args, out_dir)
    print(f"quantified {len(volumes)} volume(s) into {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# evaluate


def _parse_size_thresholds(text: str) -> SizeThresholds:
    try:
        t1, t2 = (int(part) for part in text.split(","))
    except ValueError as exc:
        raise ValidationError(f"--size-thresholds wants 't1,t2', got {text!r}") from exc
    return SizeThresholds(t1, t2)


def _eval_units(args) -> list[tuple[str, ProbMap, EntropyMap, BinaryMask, int | None]]:
    """Collect (unit id, mean, entropy, gt, pass count) tuples to score."""
    base = 2.0 if args.log_base == "2" else math.e
    triples = []
    if args.mean:
        if not (args.entropy and args.gt):
            raise ValidationError("single-image mode needs --mean, --entropy and --gt")
        mean = formats.read_prob_map(args.mean, lenient=args.lenient)
        ent_values = formats.read_entropy(args.entropy, lenient=args.lenient)
        gt = formats.read_mask(args.gt)
        ent = EntropyMap(ent_values, n_classes=mean.classes, base=base)
        triples.append((_image_id(Path(args.mean).stem.removesuffix(".mean")), mean, ent, gt, None))
    else:
        if not (args.pred_dir and args.gt_dir):
            raise ValidationError("batch mode needs --pred-dir and --gt-dir")
        pred_dir = Path(args.pred_dir)
        gt_dir = Path(args.gt_dir)
        mean_paths = sorted(pred_dir.glob("*.mean.npy"))
        if not mean_paths:
            raise ValidationError(f"no *.mean.npy files under {pred_dir}")
        for mean_path in mean_paths:
            stem = mean_path.name.removesuffix(".mean.npy")
            image_id = _image_id(stem)
            gt_path = gt_dir / f"gt_{image_id}.png"
            if not gt_path.exists():
                raise ValidationError(f"missing ground truth {gt_path} for {stem}")
            mean = formats.read_prob_map(mean_path, lenient=args.lenient)
            ent_values = formats.read_entropy(pred_dir / f"{stem}.entropy.npy", lenient=args.lenient)
            gt = formats.read_mask(gt_path)
            ent = EntropyMap(ent_values, n_classes=mean.classes, base=base)
            passes = None
            sidecar = pred_dir / f"{stem}.uncertainty.json"
            if sidecar.exists():
                passes = json.loads(sidecar.read_text(encoding="utf-8")).get("passes")
            triples.append((image_id, mean, ent, gt, passes))

    if args.window is None:
        return triples
    units = []
    for image_id, mean, ent, gt, passes in triples:
        grid = plan_grid(*mean.shape, window=args.window, stride=args.stride or args.window)
        for r, c in grid.origins:
            w = grid.window
            unit_id = f"{image_id}:{r:03d}-{c:03d}"
            units.append(
                (
                    unit_id,
                    ProbMap(mean.data[r : r + w, c : c + w]),
                    EntropyMap(ent.data[r : r + w, c : c + w], n_classes=ent.n_classes, base=ent.base),
                    BinaryMask(gt.data[r : r + w, c : c + w]),
                    passes,
                )
            )
    return units


def _cmd_evaluate(args) -> int:
    units = _eval_units(args)

    if args.size_thresholds:
        size_thresholds = _parse_size_thresholds(args.size_thresholds)
    else:
        counts = [gt.foreground_count() for _, _, _, gt, _ in units]
        nonzero = [c for c in counts if c > 0]
        try:
            size_thresholds = tertile_thresholds(nonzero) if len(nonzero) >= 3 else None
        except ValidationError:
            size_thresholds = None

    if args.abs_threshold is not None:
        policies = [ThresholdPolicy(quantile=None, absolute=args.abs_threshold)] * len(units)
    elif args.cutoff_scope == "dataset":
        pooled = np.concatenate([ent.data.ravel() for _, _, ent, _, _ in units])
        cutoff = ThresholdPolicy(quantile=1.0 - args.exclude_fraction).cutoff(pooled)
        policies = [ThresholdPolicy(quantile=None, absolute=cutoff)] * len(units)
    else:
        policies = [ThresholdPolicy(quantile=1.0 - args.exclude_fraction)] * len(units)

    rows = []
    for (unit_id, mean, ent, gt, passes), policy in zip(units, policies):
        report = thresholded_eval(
            mean, ent, gt, policy=policy, size_thresholds=size_thresholds, pass_count=passes
        )
        rows.extend(reporting.rows_from_report(unit_id, args.method, report))
    rows = rows + reporting.aggregate_rows(rows)

    out_base = Path(args.out)
    out_base.parent.mkdir(parents=True, exist_ok=True)
    csv_path = out_base.with_suffix(".csv")
    json_path = out_base.with_suffix(".json")
    reporting.write_report_csv(csv_path, rows)
    reporting.write_report_json(json_path, rows)
    print(f"evaluated {len(units)} unit(s); wrote {csv_path} and {json_path}")
    return 0


# ---------------------------------------------------------------------------
# correlate


def _cmd_correlate(args) -> int:
    rows = []
    for report_path in args.report:
        path = Path(report_path)
        if path.suffix == ".csv":
            rows.extend(reporting.read_report_csv(path))
        else:
            rows.extend(reporting.read_report_json(path))
    summary = reporting.correlation_summary(rows)
    out_base = Path(args.out)
    out_base.parent.mkdir(parents=True, exist_ok=True)
    json_path = out_base.with_suffix(".json")
    scatter_path = out_base.parent / f"{out_base.name}_scatter.csv"
    reporting.write_correlation_json(json_path, summary)
    reporting.write_scatter_csv(scatter_path, rows)
    for entry in summary:
        pcc = "n/a" if entry["pcc"] is None else f"{entry['pcc']:+.3f}"
        print(f"{entry['method']:<24} {entry['size_class']:<8} n={entry['n']:<4} pcc={pcc}")
    print(f"wrote {json_path} and {scatter_path}")
    return 0


# ---------------------------------------------------------------------------
# render


def _cmd_render(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    wrote = []
    if args.image and args.gt and (args.pred or args.mean):
        img = formats.read_pgm(args.image) if args.image.endswith(".pgm") else formats.read_png_image(args.image)
        gt = formats.read_mask(args.gt)
        if args.pred:
            pred = formats.read_mask(args.pred)
        else:
            pred = binarize(formats.read_prob_map(args.mean, lenient=args.lenient))
        path = out_dir / f"{args.prefix}overlay.png"
        render.render_overlay(img, gt, pred, path)
        wrote.append(path)
    if args.entropy:
        if args.mean:
            classes = formats.read_prob_map(args.mean, lenient=args.lenient).classes
        else:
            classes = args.classes
        base = 2.0 if args.log_base == "2" else math.e
        ent = EntropyMap(formats.read_entropy(args.entropy, lenient=args.lenient), n_classes=classes, base=base)
        path = out_dir / f"{args.prefix}heatmap.png"
        render.render_heatmap(ent, path)
        wrote.append(path)
    if not wrote:
        raise ValidationError(
            "nothing to render: pass --image/--gt with --pred or --mean, and/or --entropy"
        )
    print("wrote " + ", ".join(str(p) for p in wrote))
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="drusenuq",
        description="Uncertainty quantification and robust evaluation for probabilistic segmentation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = {"formatter_class": argparse.ArgumentDefaultsHelpFormatter}

    p = sub.add_parser("synth", help="emit synthetic scenes, masks, and prediction volumes", **fmt)
    p.add_argument("--count", type=int, default=8, help="number of scenes")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--sigma-model", type=float, default=1.0, help="per-pass logit noise scale")
    p.add_argument("--gain", type=float, default=1.0, help="input sensitivity of the mock predictor")
    p.add_argument("--softness", type=float, default=1.5, help="logit slope vs boundary distance")
    p.add_argument("--speckle", type=float, default=0.1, help="multiplicative speckle sigma")
    p.add_argument("--passes", type=int, default=DEFAULT_PASSES, help="passes per volume")
    p.add_argument("--height", type=int, default=96)
    p.add_argument("--width", type=int, default=96)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("quantify", help="volume (+ optional manifest) -> mean map, entropy map, summary", **fmt)
    p.add_argument("--volume", action="append", help="volume file; repeatable")
    p.add_argument("--in-dir", help="scan a synth output directory for volumes")
    p.add_argument("--manifest", help="TTA manifest (single-volume tta mode)")
    p.add_argument("--mode", choices=("mc", "tta"), default="mc")
    p.add_argument("--passes", type=int, default=DEFAULT_PASSES, help="expected pass count")
    p.add_argument("--log-base", choices=("2", "e"), default="2")
    p.add_argument("--lenient", action="store_true", help="widen float64 volumes instead of rejecting")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_quantify)

    p = sub.add_parser("evaluate", help="mean+entropy+gt -> score report rows (CSV and JSON)", **fmt)
    p.add_argument("--mean", help="mean map (single-image mode)")
    p.add_argument("--entropy", help="entropy map (single-image mode)")
    p.add_argument("--gt", help="ground-truth mask (single-image mode)")
    p.add_argument("--pred-dir", help="quantify output directory (batch mode)")
    p.add_argument("--gt-dir", help="synth output directory with gt_*.png (batch mode)")
    p.add_argument(
        "--method",
        choices=reporting.BASE_METHODS,
        required=True,
        help="row label for this evaluation",
    )
    p.add_argument(
        "--exclude-fraction",
        type=float,
        default=DEFAULT_EXCLUDE_FRACTION,
        help="entropy-quantile exclusion fraction",
    )
    p.add_argument("--abs-threshold", type=float, help="absolute entropy cutoff, overrides the quantile")
    p.add_argument("--cutoff-scope", choices=("image", "dataset"), default="image")
    p.add_argument("--size-thresholds", help="explicit 't1,t2' pixel-count boundaries")
    p.add_argument("--window", type=int, choices=ALLOWED_WINDOWS, help="score per patch of this window")
    p.add_argument("--stride", type=int, help="patch stride (default: window)")
    p.add_argument("--log-base", choices=("2", "e"), default="2")
    p.add_argument("--lenient", action="store_true")
    p.add_argument("--out", required=True, help="output base path (writes .csv and .json)")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("correlate", help="report -> PCC per size class + scatter data", **fmt)
    p.add_argument("--report", action="append", required=True, help="report file; repeatable")
    p.add_argument("--out", required=True, help="output base path")
    p.set_defaults(func=_cmd_correlate)

    p = sub.add_parser("render", help="overlays and uncertainty heatmaps", **fmt)
    p.add_argument("--image", help="grayscale image (PGM or PNG)")
    p.add_argument("--gt", help="ground-truth mask PNG")
    p.add_argument("--pred", help="predicted mask PNG")
    p.add_argument("--mean", help="mean map NPY (binarized for the overlay)")
    p.add_argument("--entropy", help="entropy map NPY")
    p.add_argument("--classes", type=int, default=2, help="class count when no --mean is given")
    p.add_argument("--log-base", choices=("2", "e"), default="2")
    p.add_argument("--prefix", default="", help="output filename prefix")
    p.add_argument("--lenient", action="store_true")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_render)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DrusenUQError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
