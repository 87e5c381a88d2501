"""Registry of the 26 QA subtasks and their answer formats.

Subtask ids are stable strings used in corpora, manifests, and reports.
Object-movement subtasks exist once per dynamic capture style ("ego" for
egocentric recordings, "studio" for fixed multi-camera rigs); a bundle's
manifest declares which style it carries.
"""

from __future__ import annotations

from dataclasses import dataclass

# answer kinds
LABEL = "label"
MCQ_LETTER = "mcq-letter"
SCALAR_MM = "scalar-mm"
SCALAR_DEG = "scalar-deg"
COORDINATE_PAIR = "coordinate-pair"
VECTOR_3 = "vector-3"

ANSWER_KINDS = (LABEL, MCQ_LETTER, SCALAR_MM, SCALAR_DEG, COORDINATE_PAIR, VECTOR_3)

# referencing modes
REF_DOT = "dot-annotation"
REF_COORD = "normalized-coordinates"
REF_SEMANTIC = "semantic-label"
REF_NONE = "none"

DYNAMIC_SOURCES = ("ego", "studio")

MCQ_LETTERS = ("A", "B", "C", "D")


@dataclass(frozen=True)
class SubtaskInfo:
    subtask_id: str
    family: str  # depth / correspondence / camera / object_movement / object_size
    answer_kind: str
    referencing: str
    template_key: str
    num_images: int  # -1 = variable (coverage sets)
    labels: tuple[str, ...] = ()  # vocabulary for label-kind answers


def _build_registry() -> dict[str, SubtaskInfo]:
    reg: dict[str, SubtaskInfo] = {}

    def add(info: SubtaskInfo) -> None:
        reg[info.subtask_id] = info

    add(SubtaskInfo("depth_value_dot", "depth", SCALAR_MM, REF_DOT, "depth_value_dot", 1))
    add(SubtaskInfo("depth_value_coord", "depth", SCALAR_MM, REF_COORD, "depth_value_coord", 1))
    add(
        SubtaskInfo(
            "depth_comparison_dot", "depth", LABEL, REF_DOT,
            "depth_comparison_dot", 1, ("A", "B"),
        )
    )
    add(
        SubtaskInfo(
            "depth_comparison_coord", "depth", LABEL, REF_COORD,
            "depth_comparison_coord", 1, ("A", "B"),
        )
    )

    add(
        SubtaskInfo(
            "correspondence_mcq", "correspondence", MCQ_LETTER, REF_DOT,
            "correspondence_mcq", 2, MCQ_LETTERS,
        )
    )
    add(
        SubtaskInfo(
            "correspondence_coord", "correspondence", COORDINATE_PAIR, REF_COORD,
            "correspondence_coord", 2,
        )
    )

    for axis, labels in (
        ("lateral", ("left", "right")),
        ("vertical", ("up", "down")),
        ("longitudinal", ("forward", "backward")),
    ):
        add(
            SubtaskInfo(
                f"camera_translation_direction_{axis}", "camera", LABEL, REF_NONE,
                f"camera_translation_direction_{axis}", 2, labels,
            )
        )
    add(
        SubtaskInfo(
            "camera_rotation_direction_yaw", "camera", LABEL, REF_NONE,
            "camera_rotation_direction_yaw", 2, ("left", "right"),
        )
    )
    add(
        SubtaskInfo(
            "camera_rotation_direction_tilt", "camera", LABEL, REF_NONE,
            "camera_rotation_direction_tilt", 2, ("up", "down"),
        )
    )
    add(
        SubtaskInfo(
            "camera_translation_distance", "camera", SCALAR_MM, REF_NONE,
            "camera_translation_distance", 2,
        )
    )
    add(
        SubtaskInfo(
            "camera_rotation_angle", "camera", SCALAR_DEG, REF_NONE,
            "camera_rotation_angle", 2,
        )
    )
    add(
        SubtaskInfo(
            "camera_translation_vector", "camera", VECTOR_3, REF_NONE,
            "camera_translation_vector", 2,
        )
    )
    add(
        SubtaskInfo(
            "camera_orientation_degree", "camera", SCALAR_DEG, REF_NONE,
            "camera_orientation_degree", 2,
        )
    )

    for source in DYNAMIC_SOURCES:
        add(
            SubtaskInfo(
                f"object_movement_distance_dot_{source}", "object_movement",
                SCALAR_MM, REF_DOT, "object_movement_distance_dot", 2,
            )
        )
        add(
            SubtaskInfo(
                f"object_movement_distance_coord_{source}", "object_movement",
                SCALAR_MM, REF_COORD, "object_movement_distance_coord", 2,
            )
        )
        add(
            SubtaskInfo(
                f"object_movement_vector_dot_{source}", "object_movement",
                VECTOR_3, REF_DOT, "object_movement_vector_dot", 2,
            )
        )
        add(
            SubtaskInfo(
                f"object_movement_vector_coord_{source}", "object_movement",
                VECTOR_3, REF_COORD, "object_movement_vector_coord", 2,
            )
        )

    for dimension in ("height", "width", "length"):
        add(
            SubtaskInfo(
                f"object_size_{dimension}", "object_size", SCALAR_MM, REF_SEMANTIC,
                "object_size", -1,
            )
        )
    return reg


REGISTRY: dict[str, SubtaskInfo] = _build_registry()

ALL_SUBTASKS: tuple[str, ...] = tuple(REGISTRY)

assert len(ALL_SUBTASKS) == 26


def subtask_info(subtask_id: str) -> SubtaskInfo:
    try:
        return REGISTRY[subtask_id]
    except KeyError:
        raise KeyError(f"unknown subtask id {subtask_id!r}") from None


def answer_kind(subtask_id: str) -> str:
    return subtask_info(subtask_id).answer_kind


def object_movement_subtask(kind: str, referencing: str, source: str) -> str:
    """Compose an object-movement subtask id; source must be a known style."""
    if source not in DYNAMIC_SOURCES:
        raise ValueError(
            f"dynamic bundle source must be one of {DYNAMIC_SOURCES}, got {source!r}"
        )
    ref = {"dot-annotation": "dot", "normalized-coordinates": "coord"}[referencing]
    return f"object_movement_{kind}_{ref}_{source}"
