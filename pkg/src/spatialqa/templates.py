"""Loading and validating QA template sets.

Templates are plain JSON so corpora can be restyled without code changes.
Every subtask points at one template key holding parallel lists of task
descriptions (with <image> placeholders), question templates, and answer
templates; answer templates carry exactly one backtick-delimited value
region and only slots the matching generator provides.
"""

from __future__ import annotations

import json
import string
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .subtasks import REGISTRY

IMAGE_TOKEN = "<image>"

# slots each generator fills, per template key
_PROVIDED_SLOTS: dict[str, set[str]] = {
    "depth_value_dot": {"depth"},
    "depth_value_coord": {"x", "y", "depth", "coordinate_note"},
    "depth_comparison_dot": {"label"},
    "depth_comparison_coord": {"xa", "ya", "xb", "yb", "label", "coordinate_note"},
    "correspondence_mcq": {"label"},
    "correspondence_coord": {"x", "y", "x2", "y2", "coordinate_note"},
    "camera_translation_direction_lateral": {"label"},
    "camera_translation_direction_vertical": {"label"},
    "camera_translation_direction_longitudinal": {"label"},
    "camera_rotation_direction_yaw": {"label"},
    "camera_rotation_direction_tilt": {"label"},
    "camera_translation_distance": {"distance"},
    "camera_rotation_angle": {"angle"},
    "camera_translation_vector": {"dx", "dy", "dz"},
    "camera_orientation_degree": {"angle"},
    "object_movement_distance_dot": {"distance"},
    "object_movement_distance_coord": {"x", "y", "distance", "coordinate_note"},
    "object_movement_vector_dot": {"dx", "dy", "dz"},
    "object_movement_vector_coord": {"x", "y", "dx", "dy", "dz", "coordinate_note"},
    "object_size": {"images", "dimension", "category", "value"},
}


class TemplateError(ValueError):
    """Template file is malformed or inconsistent with the generators."""


@dataclass(frozen=True)
class SubtaskTemplates:
    key: str
    descriptions: tuple[str, ...]
    questions: tuple[str, ...]
    answers: tuple[str, ...]


@dataclass(frozen=True)
class TemplateSet:
    coordinate_note: str
    by_key: dict[str, SubtaskTemplates]

    def for_key(self, key: str) -> SubtaskTemplates:
        return self.by_key[key]


def _slots_of(template: str) -> set[str]:
    return {
        field
        for _, field, _, _ in string.Formatter().parse(template)
        if field is not None and field != ""
    }


def _validate_entry(key: str, entry: SubtaskTemplates) -> None:
    provided = _PROVIDED_SLOTS.get(key)
    if provided is None:
        raise TemplateError(f"template key {key!r} has no registered generator")
    for kind, texts in (
        ("description", entry.descriptions),
        ("question", entry.questions),
        ("answer", entry.answers),
    ):
        if not texts:
            raise TemplateError(f"{key}: empty {kind} list")
        for text in texts:
            missing = _slots_of(text) - provided
            if missing:
                raise TemplateError(
                    f"{key}: {kind} template references unprovided slots {sorted(missing)}"
                )
    for text in entry.answers:
        if text.count("`") != 2:
            raise TemplateError(
                f"{key}: answer template must have exactly one backtick region: {text!r}"
            )


def load_template_set(path: Path | None = None) -> TemplateSet:
    """Load templates from ``path`` (or the built-in defaults) and validate.

    Raises TemplateError when a template references a slot its generator does
    not provide, or an answer template lacks the single backtick region.
    """
    if path is None:
        raw = resources.files("spatialqa").joinpath("data/templates.json").read_text("utf-8")
    else:
        raw = Path(path).read_text(encoding="utf-8")
    doc = json.loads(raw)
    if doc.get("version") != 1:
        raise TemplateError(f"unsupported template file version {doc.get('version')!r}")
    by_key: dict[str, SubtaskTemplates] = {}
    for key, entry in doc["templates"].items():
        st = SubtaskTemplates(
            key=key,
            descriptions=tuple(entry["descriptions"]),
            questions=tuple(entry["questions"]),
            answers=tuple(entry["answers"]),
        )
        _validate_entry(key, st)
        by_key[key] = st

    needed = {info.template_key for info in REGISTRY.values()}
    missing = needed - set(by_key)
    if missing:
        raise TemplateError(f"template file lacks keys: {sorted(missing)}")
    return TemplateSet(coordinate_note=doc.get("coordinate_note", ""), by_key=by_key)
