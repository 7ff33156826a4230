"""Walkthrough: how strongly does foreground uncertainty predict accuracy?

Sweeps the predictor's noise level over size-matched scenes, collects one
(U_avg, dice) point per image for both ensembling routes, and reports the
Pearson correlation. A scatter plot goes to demos/output/. The correlation
is strongly negative: images the model is uncertain about are the images
it segments badly, so U_avg works as a label-free quality signal.
"""

import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from drusenuq import (
    MockPredictorSpec,
    aggregate_passes,
    average_drusen_uncertainty,
    binarize,
    confusion,
    entropy_map,
    generate_scene,
    metrics,
    pearson,
    run_mc,
    run_tta,
    sample_scene_spec,
)

OUT = pathlib.Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

SIGMAS = (0.25, 0.5, 1.0, 2.0)
PER_LEVEL = 15


def collect(mode):
    points = []
    for level, sigma in enumerate(SIGMAS):
        for i in range(PER_LEVEL):
            scene = sample_scene_spec(
                seed=5000 + i, shape=(96, 96), max_drusen=1,
                radius_col_range=(10, 10), radius_row_range=(5, 5),
            )
            img, gt = generate_scene(scene)
            predictor = MockPredictorSpec(
                sigma_model=sigma, gain=0.5, softness=1.0, seed=6000 + level * 100 + i
            )
            if mode == "mc":
                volume = run_mc(predictor, img, gt, passes=10)
            else:
                volume = run_tta(predictor, img, gt, passes=10, tta_seed=7000 + level * 100 + i)
            mean = aggregate_passes(volume)
            u, _ = average_drusen_uncertainty(mean, entropy_map(mean))
            dice = metrics(confusion(binarize(mean), gt)).dice
            points.append((sigma, u, dice))
    return points


def main():
    fig, axes = plt.subplots(1, 2, figsize=(10, 4), sharey=True)
    for ax, mode in zip(axes, ("mc", "tta")):
        points = collect(mode)
        u = [p[1] for p in points]
        dice = [p[2] for p in points]
        pcc = pearson(u, dice)
        print(f"{mode}: PCC(U_avg, dice) = {pcc:+.3f} over {len(points)} images")
        for sigma in SIGMAS:
            xs = [p[1] for p in points if p[0] == sigma]
            ys = [p[2] for p in points if p[0] == sigma]
            ax.scatter(xs, ys, s=14, label=f"noise {sigma}")
        ax.set_title(f"{mode}: PCC = {pcc:+.3f}")
        ax.set_xlabel("U_avg (bits)")
        ax.legend(fontsize=7)
    axes[0].set_ylabel("dice")
    fig.tight_layout()
    fig.savefig(OUT / "03_correlation.png", dpi=120)
    print(f"scatter plot written to {OUT / '03_correlation.png'}")


if __name__ == "__main__":
    main()
