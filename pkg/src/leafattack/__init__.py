"""Leaf-occlusion adversarial search against traffic-sign classifiers.

The package covers the full loop: leaf mask extraction from photographs,
constrained patch placement search against a classifier, and edge-map metrics
for comparing adversarial images to their clean baselines.
"""

from .attack import (
    ATTACK_SUMMARY_HEADER,
    DEFAULT_ANGLES,
    DEFAULT_RATIOS,
    AttackConfig,
    AttackOutcome,
    AttackReport,
    PlacementCandidate,
    composite_candidate,
    enumerate_candidates,
    patch_side,
    prepare_patch,
    run_attack,
)
from .classifier import (
    DEFAULT_CLASS_LABELS,
    ClassifierSpec,
    CnnClassifier,
    ConvLayer,
    DenseLayer,
    FlattenLayer,
    MaxPoolLayer,
    Probabilities,
    ReluLayer,
    StubClassifier,
    default_classifier_spec,
    forward,
    load_spec,
    stub_classifier,
    write_spec_binary,
    write_spec_json,
)
from .edgeops import (
    EdgeParams,
    canny,
    close,
    connected_components,
    dilate,
    erode,
    gaussian_blur,
    largest_contour_fill,
    sobel,
)
from .errors import (
    ImageIOError,
    LeafAttackError,
    MaskGenerationError,
    NoContourError,
    PatchError,
    PlacementError,
    SpecLoadError,
    UndefinedPercentError,
)
from .maskgen import generate_leaf_mask, make_leaf_asset
from .metrics import (
    ADVERSARIAL_INPUT_HEADER,
    BASELINE_HEADER,
    COMPARISON_HEADER,
    SUCCESSFUL_AVERAGE_LABEL,
    UNSUCCESSFUL_AVERAGE_LABEL,
    CohortAverages,
    EdgeMetrics,
    MetricsDelta,
    cohort_averages,
    comparison_json_dict,
    comparison_rows,
    edge_metrics,
    load_fixture_expected,
    metrics_delta,
    metrics_json_dict,
    read_adversarial_csv,
    read_metrics_csv,
    write_comparison_csv,
    write_metrics_csv,
)
from .raster import (
    BinaryMask,
    LeafAsset,
    RasterImage,
    SignInstance,
    Species,
    composite,
    read_image,
    read_mask,
    rotate,
    scale,
    scale_mask,
    to_grayscale,
    write_image,
    write_mask,
)

__version__ = "0.1.0"

__all__ = [
    "ADVERSARIAL_INPUT_HEADER",
    "ATTACK_SUMMARY_HEADER",
    "AttackConfig",
    "AttackOutcome",
    "AttackReport",
    "BASELINE_HEADER",
    "BinaryMask",
    "COMPARISON_HEADER",
    "ClassifierSpec",
    "CnnClassifier",
    "CohortAverages",
    "ConvLayer",
    "DEFAULT_ANGLES",
    "DEFAULT_CLASS_LABELS",
    "DEFAULT_RATIOS",
    "DenseLayer",
    "EdgeMetrics",
    "EdgeParams",
    "FlattenLayer",
    "ImageIOError",
    "LeafAsset",
    "LeafAttackError",
    "MaskGenerationError",
    "MaxPoolLayer",
    "MetricsDelta",
    "NoContourError",
    "PatchError",
    "PlacementCandidate",
    "PlacementError",
    "Probabilities",
    "RasterImage",
    "ReluLayer",
    "SUCCESSFUL_AVERAGE_LABEL",
    "SignInstance",
    "SpecLoadError",
    "Species",
    "StubClassifier",
    "UNSUCCESSFUL_AVERAGE_LABEL",
    "UndefinedPercentError",
    "__version__",
    "canny",
    "close",
    "cohort_averages",
    "comparison_json_dict",
    "comparison_rows",
    "composite",
    "composite_candidate",
    "connected_components",
    "default_classifier_spec",
    "dilate",
    "edge_metrics",
    "enumerate_candidates",
    "erode",
    "forward",
    "gaussian_blur",
    "generate_leaf_mask",
    "largest_contour_fill",
    "load_fixture_expected",
    "load_spec",
    "make_leaf_asset",
    "metrics_delta",
    "metrics_json_dict",
    "patch_side",
    "prepare_patch",
    "read_adversarial_csv",
    "read_image",
    "read_mask",
    "read_metrics_csv",
    "rotate",
    "run_attack",
    "scale",
    "scale_mask",
    "sobel",
    "stub_classifier",
    "to_grayscale",
    "write_comparison_csv",
    "write_image",
    "write_mask",
    "write_spec_binary",
    "write_spec_json",
]
