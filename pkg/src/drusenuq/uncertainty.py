"""Aggregation of stochastic passes, predictive entropy, and foreground
uncertainty summaries.

The mean over passes serves both ensembling routes: dropout volumes vary
the weights with a fixed input, augmentation volumes vary the input with
fixed weights (their maps arrive already back-transformed to input
geometry). The pixel-wise entropy of the averaged distribution is the
uncertainty measure; its mean over pixels predicted as foreground
(p >= 0.5) condenses it to one score per image.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import entr

from .errors import ShapeMismatch, ValidationError
from .types import EntropyMap, ProbMap, ProbVolume, foreground

FOREGROUND_GATE = 0.5


class AggregationMode(enum.Enum):
    MC_DROPOUT = "mc"
    TTA = "tta"


@dataclass(frozen=True)
class AggregationConfig:
    """Pass count and ensembling mode; T defaults to 10."""

    pass_count: int = 10
    mode: AggregationMode = AggregationMode.MC_DROPOUT

    def __post_init__(self):
        if self.pass_count < 1:
            raise ValidationError(f"pass count must be >= 1, got {self.pass_count}")


def aggregate_passes(volume: ProbVolume) -> ProbMap:
    """Arithmetic mean of the per-pass softmax maps, pixel by pixel.

    The per-pixel pass values are sorted before summation so the result is
    exactly invariant under permutations of pass order (the sum of a sorted
    sequence is a fixed floating-point computation).
    """
    stack = volume.stack()
    ordered = np.sort(stack, axis=0)
    return ProbMap(ordered.sum(axis=0) / volume.passes)


def entropy_map(mean: ProbMap, base: float = 2.0) -> EntropyMap:
    """Pixel-wise entropy -sum_c p_c log(p_c) of the averaged distribution.

    Uses the 0 * log 0 := 0 limit convention. Base 2 (bits) by default,
    giving the interpretable [0, 1] range for binary segmentation; pass
    ``base=math.e`` for nats.
    """
    if base <= 1.0:
        raise ValidationError(f"log base must exceed 1, got {base}")
    values = entr(mean.data).sum(axis=2)
    if base != math.e:
        values = values / math.log(base)
    # float round-off can leave entropy a hair above log_base(C) or below 0
    bound = math.log(mean.classes) / math.log(base)
    values = np.minimum(np.maximum(values, 0.0), bound)
    return EntropyMap(values, n_classes=mean.classes, base=base)


def average_drusen_uncertainty(
    mean: ProbMap, ent: EntropyMap, gate: float = FOREGROUND_GATE
) -> tuple[float, int]:
    """Mean entropy over pixels whose foreground probability >= ``gate``.

    Returns ``(u_avg, n)`` where ``n`` is the number of gated pixels. An
    empty selection returns ``(0.0, 0)`` rather than NaN so downstream
    aggregates across images stay finite; ``n == 0`` is the empty flag.
    """
    if mean.shape != ent.shape:
        raise ShapeMismatch(
            f"probability map shape {mean.shape} != entropy map shape {ent.shape}"
        )
    selected = foreground(mean) >= gate
    n = int(selected.sum())
    if n == 0:
        return 0.0, 0
    return float(ent.data[selected].mean()), n
