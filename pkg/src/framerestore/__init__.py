"""Adversarial restoration of artifact-degraded endoscopy frames and detection evaluation."""

from .degradation import ArtifactKind, DegradationSpec, SpecSampler, apply_artifact, build_paired_corpus, compose
from .detector import toy_blob_detector
from .errors import ConfigError, DataError, NumericError, ParameterError, ShapeError, ValidationError
from .imaging import (
    BoundingBox,
    DatasetManifest,
    Detection,
    FrameRecord,
    Quality,
    denormalize,
    load_manifest,
    normalize,
    patient_wise_split,
    save_manifest,
    validate_manifest,
)
from .metrics import (
    MetricsReport,
    aggregate_runs,
    average_precision,
    compare_reports,
    iou,
    map_range,
    match_detections,
    precision_recall_f1,
)

__version__ = "0.1.0"

__all__ = [
    "ArtifactKind",
    "BoundingBox",
    "ConfigError",
    "DataError",
    "DatasetManifest",
    "DegradationSpec",
    "Detection",
    "FrameRecord",
    "MetricsReport",
    "NumericError",
    "ParameterError",
    "Quality",
    "ShapeError",
    "SpecSampler",
    "ValidationError",
    "aggregate_runs",
    "apply_artifact",
    "average_precision",
    "build_paired_corpus",
    "compare_reports",
    "compose",
    "denormalize",
    "iou",
    "load_manifest",
    "map_range",
    "match_detections",
    "normalize",
    "patient_wise_split",
    "precision_recall_f1",
    "save_manifest",
    "toy_blob_detector",
    "validate_manifest",
]
