"""Behavioral fingerprinting of facial and gestural mannerisms.

Learns a person-specific one-class model over pairwise correlations of
32 per-frame behavioral measurements and classifies 10-second video clips
as the target identity or an impostor.
"""

from .correlation import (
    CorrelationVector,
    VectorSet,
    clip_features,
    family_dims,
    pair_index,
    pearson,
    read_vector_csv,
    write_vector_csv,
)
from .errors import (
    ConvergenceError,
    DegenerateGeometryError,
    IncompatibilityError,
    InsufficientDataError,
    MannersError,
    OrderingError,
    ParseError,
    SchemaError,
    ValidationError,
)
from .evaluation import (
    DatasetReport,
    ImportanceTable,
    LabeledClipSet,
    SweepReport,
    feature_family_eval,
    feature_importance,
    repeated_split_eval,
    subset_sweep,
)
from .features import (
    FEATURE_NAMES,
    FEATURE_ORDER_HASH,
    FrameRecord,
    FrameStream,
    NormalizedFrame,
    ValidationReport,
    normalize_gestures,
    parse_feature_csv,
    validate_stream,
    write_feature_csv,
)
from .ocsvm import (
    HyperGrid,
    SvmModel,
    calibrate_threshold,
    default_grid,
    grid_search,
    load_model,
    rbf_kernel,
    save_model,
    score,
    score_many,
    train,
)
from .preprocess import (
    Clip,
    MotionMask,
    Segment,
    detect_camera_motion,
    excise_and_split,
    segment_clips,
)
from .synthetic import (
    PersonaSpec,
    make_persona_pair,
    nearest_correlation,
    sample_stream,
)

__version__ = "0.1.0"

__all__ = [
    "CorrelationVector", "VectorSet", "clip_features", "family_dims",
    "pair_index", "pearson", "read_vector_csv", "write_vector_csv",
    "ConvergenceError", "DegenerateGeometryError", "IncompatibilityError",
    "InsufficientDataError", "MannersError", "OrderingError", "ParseError",
    "SchemaError", "ValidationError",
    "DatasetReport", "ImportanceTable", "LabeledClipSet", "SweepReport",
    "feature_family_eval", "feature_importance", "repeated_split_eval",
    "subset_sweep",
    "FEATURE_NAMES", "FEATURE_ORDER_HASH", "FrameRecord", "FrameStream",
    "NormalizedFrame", "ValidationReport", "normalize_gestures",
    "parse_feature_csv", "validate_stream", "write_feature_csv",
    "HyperGrid", "SvmModel", "calibrate_threshold", "default_grid",
    "grid_search", "load_model", "rbf_kernel", "save_model", "score",
    "score_many", "train",
    "Clip", "MotionMask", "Segment", "detect_camera_motion",
    "excise_and_split", "segment_clips",
    "PersonaSpec", "make_persona_pair", "nearest_correlation", "sample_stream",
]
