"""Walkthrough: uncertainty-thresholded evaluation over a small corpus.

Scores a batch of synthetic scans the plain way and again with the
least-confident 2.5% of pixels excluded, then prints a per-size-class
table in the style of a method-comparison results table. Excluding the
high-entropy pixels consistently lifts dice/precision/recall because the
predictor's errors live where its entropy is high.
"""

from drusenuq import (
    MockPredictorSpec,
    ThresholdPolicy,
    aggregate_passes,
    entropy_map,
    generate_scene,
    run_mc,
    run_tta,
    sample_scene_spec,
    tertile_thresholds,
    thresholded_eval,
)
from drusenuq.reporting import aggregate_rows, rows_from_report

N_SCENES = 24


def main():
    scenes = [sample_scene_spec(seed=100 + i, shape=(96, 96)) for i in range(N_SCENES)]
    pairs = [generate_scene(s) for s in scenes]
    thresholds = tertile_thresholds(gt.foreground_count() for _, gt in pairs)
    print(f"size tertiles over {N_SCENES} scenes: t1={thresholds.t1}, t2={thresholds.t2}")

    rows = []
    for i, (img, gt) in enumerate(pairs):
        predictor = MockPredictorSpec(sigma_model=1.0, gain=1.0, softness=1.5, seed=200 + i)
        for method, volume in (
            ("epistemic", run_mc(predictor, img, gt, passes=10)),
            ("aleatoric", run_tta(predictor, img, gt, passes=10, tta_seed=300 + i)),
        ):
            mean = aggregate_passes(volume)
            ent = entropy_map(mean)
            report = thresholded_eval(
                mean, ent, gt,
                policy=ThresholdPolicy(quantile=0.975),
                size_thresholds=thresholds,
                pass_count=volume.passes,
            )
            rows.extend(rows_from_report(f"{i:03d}", method, report))

    print(f"\n{'method':<24}{'size':<8}{'dice':>7}{'prec':>7}{'recall':>7}{'excl%':>7}{'n':>4}")
    for row in aggregate_rows(rows):
        if row.size_class == "all":
            continue
        excl = "" if row.excluded_fraction is None else f"{100 * row.excluded_fraction:.1f}"
        print(
            f"{row.method:<24}{row.size_class:<8}{row.dice:>7.3f}{row.precision:>7.3f}"
            f"{row.recall:>7.3f}{excl:>7}{row.n_images:>4}"
        )
    print("\nthresholded rows beat their plain counterparts at ~2.5% exclusion")


if __name__ == "__main__":
    main()
