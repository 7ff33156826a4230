"""drusenuq: epistemic/aleatoric uncertainty quantification and robust
evaluation for probabilistic image segmentation.

The pipeline: stochastic prediction volumes (dropout passes or test-time
augmentation) are averaged into a per-pixel class distribution, its
entropy becomes the pixel-wise uncertainty map, and the mean entropy over
predicted-foreground pixels condenses it to one score per image. Those
maps then drive uncertainty-thresholded evaluation (scoring only where
the model is confident) and uncertainty-accuracy correlation analysis.
"""

from .errors import (
    CountMismatch,
    DegenerateSeries,
    DrusenOutOfBounds,
    DrusenUQError,
    EmptyVolume,
    IoFailure,
    MalformedHeader,
    MalformedMask,
    NonFiniteValue,
    OutOfRange,
    ShapeMismatch,
    SumNotOne,
    UnsupportedDtype,
    ValidationError,
    WindowTooLarge,
)
from .types import (
    BinaryMask,
    EntropyMap,
    EvalReport,
    GrayImage,
    ProbMap,
    ProbVolume,
    Provenance,
    SizeClass,
    SizeThresholds,
    foreground,
    validate_prob_map,
)
from .transforms import (
    Invertibility,
    ParamRanges,
    TransformKind,
    TransformRecord,
    apply,
    apply_to_mask,
    gaussian_kernel,
    invert,
    sample_transform,
)
from .uncertainty import (
    AggregationConfig,
    AggregationMode,
    aggregate_passes,
    average_drusen_uncertainty,
    entropy_map,
)
from .patching import PatchGrid, extract, extract_map, plan_grid, stitch
from .evaluation import (
    ConfusionCounts,
    Metrics,
    ThresholdPolicy,
    binarize,
    confusion,
    metrics,
    pearson,
    size_class,
    tertile_thresholds,
    thresholded_eval,
)
from .synthetic import (
    Druse,
    MockPredictorSpec,
    SceneSpec,
    generate_scene,
    mock_predict,
    run_mc,
    run_tta,
    sample_scene_spec,
    signed_boundary_distance,
)

__version__ = "0.1.0"

__all__ = [
    "AggregationConfig",
    "AggregationMode",
    "BinaryMask",
    "ConfusionCounts",
    "CountMismatch",
    "DegenerateSeries",
    "Druse",
    "DrusenOutOfBounds",
    "DrusenUQError",
    "EmptyVolume",
    "EntropyMap",
    "EvalReport",
    "GrayImage",
    "Invertibility",
    "IoFailure",
    "MalformedHeader",
    "MalformedMask",
    "Metrics",
    "MockPredictorSpec",
    "NonFiniteValue",
    "OutOfRange",
    "ParamRanges",
    "PatchGrid",
    "ProbMap",
    "ProbVolume",
    "Provenance",
    "SceneSpec",
    "ShapeMismatch",
    "SizeClass",
    "SizeThresholds",
    "SumNotOne",
    "ThresholdPolicy",
    "TransformKind",
    "TransformRecord",
    "UnsupportedDtype",
    "ValidationError",
    "WindowTooLarge",
    "aggregate_passes",
    "apply",
    "apply_to_mask",
    "average_drusen_uncertainty",
    "binarize",
    "confusion",
    "entropy_map",
    "extract",
    "extract_map",
    "foreground",
    "gaussian_kernel",
    "generate_scene",
    "invert",
    "metrics",
    "mock_predict",
    "pearson",
    "plan_grid",
    "run_mc",
    "run_tta",
    "sample_scene_spec",
    "sample_transform",
    "signed_boundary_distance",
    "size_class",
    "stitch",
    "tertile_thresholds",
    "thresholded_eval",
    "validate_prob_map",
]
