"""spatialqa: data engine and evaluator for multi-frame spatial QA.

Turns posed RGB-D scene bundles (and tracked 4D sequences) into templated
question-answer corpora over depth, correspondence, camera motion, object
motion, and object size, then scores model predictions against them with
tolerance-based metrics.
"""

from .config import EngineConfig
from .corpus import SplitPolicy, emit_corpus
from .coverage import CoverageQuery, axis_coverage, bfs_min_coverage
from .evaluate import EvalRecord, aggregate, evaluate_files, extract_answer, score
from .geometry import (
    OrientationAngles,
    RelativePose,
    is_visible,
    normalize_pixel,
    object_displacement,
    orientation_angles,
    project_point,
    relative_pose,
    translation_direction_labels,
)
from .qa import QASample
from .sampling import (
    PairCandidate,
    SamplerConfig,
    overlap_ratio,
    sample_dynamic_pairs,
    sample_pairs_balanced,
    visible_point_set,
)
from .scene import (
    CameraFrame,
    ObjectAnnotation,
    SceneBundle,
    ScenePointCloud,
    TrackedSequence,
    Violation,
    validate_scene,
)
from .segmentation import SegmentationConfig, segment, smooth_distance_changes

__version__ = "0.1.0"

__all__ = [
    "EngineConfig",
    "SplitPolicy",
    "emit_corpus",
    "CoverageQuery",
    "axis_coverage",
    "bfs_min_coverage",
    "EvalRecord",
    "aggregate",
    "evaluate_files",
    "extract_answer",
    "score",
    "OrientationAngles",
    "RelativePose",
    "is_visible",
    "normalize_pixel",
    "object_displacement",
    "orientation_angles",
    "project_point",
    "relative_pose",
    "translation_direction_labels",
    "QASample",
    "PairCandidate",
    "SamplerConfig",
    "overlap_ratio",
    "sample_dynamic_pairs",
    "sample_pairs_balanced",
    "visible_point_set",
    "CameraFrame",
    "ObjectAnnotation",
    "SceneBundle",
    "ScenePointCloud",
    "TrackedSequence",
    "Violation",
    "validate_scene",
    "SegmentationConfig",
    "segment",
    "smooth_distance_changes",
    "__version__",
]
