"""Billboard detection and driver gaze-duration classification."""

from ._bgz import (
    Detector,
    Model,
    RuntimeFailure,
    ValidationError,
    __version__,
    aggregate_votes,
    average_precision,
    classification_report,
    iou,
    nms,
    pca_fit,
    run_cli,
)

__all__ = [
    "Detector",
    "Model",
    "RuntimeFailure",
    "ValidationError",
    "__version__",
    "aggregate_votes",
    "average_precision",
    "classification_report",
    "iou",
    "nms",
    "pca_fit",
    "run_cli",
]
