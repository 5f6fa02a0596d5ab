"""Tracking-by-detection for grayscale (thermal) video.

Box association fuses Kalman-predicted motion overlap with intensity-histogram
identity similarity into one weighted score, feeding two-tier (byte-style) or
observation-centric tracklet engines. Ships with a CLEAR-MOT / identity-metric
evaluator, MOT-format sequence I/O, a deterministic synthetic-scenario oracle,
and a batch CLI.
"""

from .core import (
    BoundingBox,
    ConfigurationError,
    DataFormatError,
    Detection,
    GrayImage,
    SequencingError,
    clip_to_image,
    iou,
)
from .motion import KalmanFilter, KalmanState, motion_similarity_matrix, state_to_box
from .association import (
    AssignmentResult,
    Histogram,
    HistogramConfig,
    bhattacharyya,
    compute_histogram,
    extract_roi,
    fuse,
    histogram_of_box,
    solve_assignment,
    thermal_similarity_matrix,
)
from .tracker import (
    BYTE_TUNED,
    OCSORT_TUNED,
    Tracker,
    TrackerConfig,
    TrackRecord,
    TrackStatus,
    Tracklet,
)
from .metrics import EvalReport, GroundTruthTrack, aggregate, evaluate_sequence

__version__ = "0.1.0"

__all__ = [
    "BoundingBox",
    "Detection",
    "GrayImage",
    "ConfigurationError",
    "DataFormatError",
    "SequencingError",
    "iou",
    "clip_to_image",
    "KalmanFilter",
    "KalmanState",
    "motion_similarity_matrix",
    "state_to_box",
    "Histogram",
    "HistogramConfig",
    "AssignmentResult",
    "extract_roi",
    "compute_histogram",
    "histogram_of_box",
    "bhattacharyya",
    "thermal_similarity_matrix",
    "fuse",
    "solve_assignment",
    "Tracker",
    "TrackerConfig",
    "TrackRecord",
    "TrackStatus",
    "Tracklet",
    "BYTE_TUNED",
    "OCSORT_TUNED",
    "EvalReport",
    "GroundTruthTrack",
    "evaluate_sequence",
    "aggregate",
    "__version__",
]
