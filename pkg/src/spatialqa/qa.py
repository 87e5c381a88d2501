"""QA sample construction for the five task families.

Each generator combines geometry outputs with a sampled template and
produces a QASample: question text, answer text with one backticked value,
a structured ground truth that the evaluator's extractor must recover
exactly, and optional per-image dot overlays.

Raises SkipSample when a draw cannot satisfy its constraints (too few
visible points, ambiguous depth tie, degenerate orientation, ...);
corpus assembly treats that as "try another draw".
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .annotate import DotOverlay
from .coverage import AXIS_INDEX, dimension_axis
from .geometry import (
    normalize_pixel,
    object_displacement,
    orientation_angles,
    project_point,
    project_points,
    relative_pose,
    rotation_angle_deg,
    translation_direction_labels,
    visible_mask,
    wrap_angle_deg,
)
from .sampling import PairCandidate, SamplerConfig, sample_dynamic_pairs
from .scene import CameraFrame, ObjectAnnotation, ScenePointCloud, TrackedSequence
from .subtasks import (
    COORDINATE_PAIR,
    LABEL,
    MCQ_LETTER,
    MCQ_LETTERS,
    REF_COORD,
    REF_DOT,
    REF_NONE,
    REF_SEMANTIC,
    SCALAR_DEG,
    SCALAR_MM,
    VECTOR_3,
    object_movement_subtask,
    subtask_info,
)
from .templates import TemplateSet

CAMERA_KINDS = (
    "translation_direction_lateral",
    "translation_direction_vertical",
    "translation_direction_longitudinal",
    "rotation_direction_yaw",
    "rotation_direction_tilt",
    "translation_distance",
    "rotation_angle",
    "translation_vector",
    "orientation_degree",
)


class SkipSample(Exception):
    """This draw cannot produce a valid sample; try another."""


@dataclass(frozen=True)
class GenParams:
    """Numeric policies shared by the generators."""

    tau_still_m: float = 0.01  # direction components below this are "none"
    tau_rot_deg: float = 1.0  # rotation-direction dead zone
    depth_tie_mm: float = 20.0  # comparison pairs closer than this are rejected
    min_separation_px: float = 10.0  # distractor spacing floor
    hard_radius_frac: float = 0.05  # hard distractors within this * width of truth
    max_retries: int = 30


@dataclass(frozen=True)
class GroundTruth:
    kind: str
    value: object  # str for labels, int for scalars, [int, int(, int)] for tuples

    def to_json(self) -> dict:
        return {"kind": self.kind, "value": self.value}


@dataclass
class QASample:
    subtask: str
    frame_ids: list[str]
    question: str
    answer: str
    ground_truth: GroundTruth
    referencing: str
    overlays: dict[int, list[DotOverlay]] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)
    sample_id: str = ""


def round_half_away(x: float) -> int:
    """Round to nearest integer, ties away from zero (1234.5 -> 1235)."""
    return int(math.floor(abs(x) + 0.5)) * (1 if x >= 0 else -1)


def to_mm(meters: float) -> int:
    return round_half_away(meters * 1000.0)


def _pick(rng: np.random.Generator, seq):
    return seq[int(rng.integers(len(seq)))]


def _fill(
    templates: TemplateSet,
    key: str,
    rng: np.random.Generator,
    slots: dict,
    images_block: str | None = None,
) -> tuple[str, str]:
    st = templates.for_key(key)
    desc = _pick(rng, st.descriptions)
    q = _pick(rng, st.questions)
    a = _pick(rng, st.answers)
    values = dict(slots)
    values.setdefault("coordinate_note", templates.coordinate_note)
    if images_block is not None:
        values["images"] = images_block
    question = desc.format(**values) + "\n" + q.format(**values)
    return question, a.format(**values)


def _norm(u: float, v: float, frame: CameraFrame) -> tuple[int, int]:
    return normalize_pixel(u, v, frame.width, frame.height)


def _visible_indices(frame: CameraFrame, cloud: ScenePointCloud) -> np.ndarray:
    return np.nonzero(visible_mask(frame, cloud.positions))[0]


# ---------------------------------------------------------------------------
# depth perception


def gen_depth_qa(
    frame: CameraFrame,
    cloud: ScenePointCloud,
    mode: str,
    referencing: str,
    rng: np.random.Generator,
    templates: TemplateSet,
    params: GenParams = GenParams(),
) -> QASample:
    """Depth value or two-point depth comparison on a single frame."""
    vis = _visible_indices(frame, cloud)
    if mode == "value":
        if len(vis) < 1:
            raise SkipSample("no visible points")
        idx = int(_pick(rng, vis))
        u, v, z = project_point(frame, cloud.positions[idx])
        subtask = "depth_value_dot" if referencing == REF_DOT else "depth_value_coord"
        depth_mm = to_mm(z)
        slots: dict = {"depth": depth_mm}
        overlays: dict[int, list[DotOverlay]] = {}
        if referencing == REF_DOT:
            overlays[0] = [DotOverlay(u, v)]
        else:
            nx, ny = _norm(u, v, frame)
            slots.update(x=nx, y=ny)
        question, answer = _fill(templates, subtask, rng, slots)
        return QASample(
            subtask=subtask,
            frame_ids=[frame.frame_id],
            question=question,
            answer=answer,
            ground_truth=GroundTruth(SCALAR_MM, depth_mm),
            referencing=referencing,
            overlays=overlays,
            meta={"point_id": int(cloud.point_ids[idx])},
        )

    if mode != "comparison":
        raise ValueError(f"unknown depth mode {mode!r}")
    if len(vis) < 2:
        raise SkipSample("need two visible points")
    tie_m = params.depth_tie_mm / 1000.0
    for _ in range(params.max_retries):
        ia, ib = (int(i) for i in rng.choice(vis, size=2, replace=False))
        ua, va, za = project_point(frame, cloud.positions[ia])
        ub, vb, zb = project_point(frame, cloud.positions[ib])
        if abs(za - zb) >= tie_m:
            break
    else:
        raise SkipSample("all candidate pairs are depth ties")
    label = "A" if za < zb else "B"
    subtask = "depth_comparison_dot" if referencing == REF_DOT else "depth_comparison_coord"
    slots = {"label": label}
    overlays = {}
    if referencing == REF_DOT:
        overlays[0] = [DotOverlay(ua, va, "A"), DotOverlay(ub, vb, "B")]
    else:
        xa, ya = _norm(ua, va, frame)
        xb, yb = _norm(ub, vb, frame)
        slots.update(xa=xa, ya=ya, xb=xb, yb=yb)
    question, answer = _fill(templates, subtask, rng, slots)
    return QASample(
        subtask=subtask,
        frame_ids=[frame.frame_id],
        question=question,
        answer=answer,
        ground_truth=GroundTruth(LABEL, label),
        referencing=referencing,
        overlays=overlays,
        meta={
            "point_ids": [int(cloud.point_ids[ia]), int(cloud.point_ids[ib])],
            "depths_mm": [to_mm(za), to_mm(zb)],
        },
    )


# ---------------------------------------------------------------------------
# visual correspondence


def _distractor_pixels(
    candidates: np.ndarray,
    truth: tuple[float, float],
    difficulty: str,
    width: int,
    rng: np.random.Generator,
    params: GenParams,
) -> list[tuple[float, float]]:
    """Pick 3 distractor pixels from candidate projections.

    Easy keeps everything mutually (and from the truth) separated by at
    least ``min_separation_px``; hard confines distractors to an annulus
    [min_separation_px, hard_radius_frac * width] around the truth.
    """
    s_min = params.min_separation_px
    tx, ty = truth
    d_truth = np.hypot(candidates[:, 0] - tx, candidates[:, 1] - ty)
    if difficulty == "hard":
        pool = candidates[(d_truth >= s_min) & (d_truth <= params.hard_radius_frac * width)]
        min_mutual = 2.0  # keep markers from stacking on one pixel
    else:
        pool = candidates[d_truth >= s_min]
        min_mutual = s_min
    if len(pool) < 3:
        raise SkipSample(f"only {len(pool)} distractor candidates")
    order = rng.permutation(len(pool))
    chosen: list[tuple[float, float]] = []
    for k in order:
        px, py = float(pool[k, 0]), float(pool[k, 1])
        if all(math.hypot(px - cx, py - cy) >= min_mutual for cx, cy in chosen):
            chosen.append((px, py))
            if len(chosen) == 3:
                return chosen
    raise SkipSample("could not separate 3 distractors")


def gen_correspondence_qa(
    pair: PairCandidate,
    frame_i: CameraFrame,
    frame_j: CameraFrame,
    cloud: ScenePointCloud,
    mode: str,
    rng: np.random.Generator,
    templates: TemplateSet,
    difficulty: str = "easy",
    params: GenParams = GenParams(),
) -> QASample:
    """Match a co-visible point across an image pair (MCQ or coordinates)."""
    if not pair.co_visible:
        raise SkipSample("no co-visible points")
    co_ids = sorted(pair.co_visible)
    id_to_idx = {int(pid): i for i, pid in enumerate(cloud.point_ids)}
    pid = int(_pick(rng, co_ids))
    pt = cloud.positions[id_to_idx[pid]]
    u1, v1, _ = project_point(frame_i, pt)
    u2, v2, _ = project_point(frame_j, pt)

    if mode == "coordinate":
        x1, y1 = _norm(u1, v1, frame_i)
        x2, y2 = _norm(u2, v2, frame_j)
        question, answer = _fill(
            templates, "correspondence_coord", rng, {"x": x1, "y": y1, "x2": x2, "y2": y2}
        )
        return QASample(
            subtask="correspondence_coord",
            frame_ids=[frame_i.frame_id, frame_j.frame_id],
            question=question,
            answer=answer,
            ground_truth=GroundTruth(COORDINATE_PAIR, [x2, y2]),
            referencing=REF_COORD,
            meta={"point_id": pid},
        )

    if mode != "mcq":
        raise ValueError(f"unknown correspondence mode {mode!r}")
    vis_j = np.nonzero(visible_mask(frame_j, cloud.positions))[0]
    uj, vj, _ = project_points(frame_j, cloud.positions[vis_j])
    pool = np.stack([uj, vj], axis=1)
    distractors = _distractor_pixels(pool, (u2, v2), difficulty, frame_j.width, rng, params)

    correct = MCQ_LETTERS[int(rng.integers(len(MCQ_LETTERS)))]
    others = [letter for letter in MCQ_LETTERS if letter != correct]
    choice_dots = [DotOverlay(u2, v2, correct)] + [
        DotOverlay(px, py, letter) for letter, (px, py) in zip(others, distractors)
    ]
    choice_dots.sort(key=lambda d: d.label or "")
    question, answer = _fill(templates, "correspondence_mcq", rng, {"label": correct})
    return QASample(
        subtask="correspondence_mcq",
        frame_ids=[frame_i.frame_id, frame_j.frame_id],
        question=question,
        answer=answer,
        ground_truth=GroundTruth(MCQ_LETTER, correct),
        referencing=REF_DOT,
        overlays={0: [DotOverlay(u1, v1)], 1: choice_dots},
        meta={"point_id": pid, "difficulty": difficulty},
    )


# ---------------------------------------------------------------------------
# camera movement


def gen_camera_movement_qa(
    frame_i: CameraFrame,
    frame_j: CameraFrame,
    kind: str,
    rng: np.random.Generator,
    templates: TemplateSet,
    params: GenParams = GenParams(),
) -> QASample:
    """One of the nine camera-movement question kinds for a frame pair."""
    if kind not in CAMERA_KINDS:
        raise ValueError(f"unknown camera kind {kind!r}")
    subtask = f"camera_{kind}"
    rel = relative_pose(frame_i, frame_j)
    slots: dict = {}
    meta: dict = {}

    if kind.startswith("translation_direction"):
        lateral, vertical, longitudinal = translation_direction_labels(
            rel.displacement, params.tau_still_m
        )
        label = {
            "translation_direction_lateral": lateral,
            "translation_direction_vertical": vertical,
            "translation_direction_longitudinal": longitudinal,
        }[kind]
        if label == "none":
            raise SkipSample(f"{kind}: component below stillness threshold")
        slots["label"] = label
        gt = GroundTruth(LABEL, label)
    elif kind in ("rotation_direction_yaw", "rotation_direction_tilt", "orientation_degree"):
        ang_i = orientation_angles(frame_i.extrinsic_c2w)
        ang_j = orientation_angles(frame_j.extrinsic_c2w)
        if ang_i.yaw_degenerate or ang_j.yaw_degenerate:
            raise SkipSample("degenerate yaw")
        yaw_delta = wrap_angle_deg(ang_j.yaw - ang_i.yaw)
        pitch_delta = ang_j.pitch - ang_i.pitch
        meta["yaw_delta_deg"] = yaw_delta
        if kind == "rotation_direction_yaw":
            if abs(yaw_delta) < params.tau_rot_deg:
                raise SkipSample("yaw delta below dead zone")
            label = "left" if yaw_delta > 0 else "right"
            slots["label"] = label
            gt = GroundTruth(LABEL, label)
        elif kind == "rotation_direction_tilt":
            if abs(pitch_delta) < params.tau_rot_deg:
                raise SkipSample("pitch delta below dead zone")
            label = "up" if pitch_delta > 0 else "down"
            slots["label"] = label
            gt = GroundTruth(LABEL, label)
        else:
            degrees = round_half_away(yaw_delta)
            slots["angle"] = degrees
            gt = GroundTruth(SCALAR_DEG, degrees)
    elif kind == "translation_distance":
        distance = to_mm(rel.distance)
        slots["distance"] = distance
        gt = GroundTruth(SCALAR_MM, distance)
    elif kind == "rotation_angle":
        degrees = round_half_away(rotation_angle_deg(rel.transform))
        slots["angle"] = degrees
        gt = GroundTruth(SCALAR_DEG, degrees)
    else:  # translation_vector
        vec = [to_mm(c) for c in rel.displacement]
        slots.update(dx=vec[0], dy=vec[1], dz=vec[2])
        gt = GroundTruth(VECTOR_3, vec)

    question, answer = _fill(templates, subtask, rng, slots)
    return QASample(
        subtask=subtask,
        frame_ids=[frame_i.frame_id, frame_j.frame_id],
        question=question,
        answer=answer,
        ground_truth=gt,
        referencing=REF_NONE,
        meta=meta,
    )


# ---------------------------------------------------------------------------
# object movement


def _in_bounds_projection(frame: CameraFrame, point) -> tuple[float, float] | None:
    try:
        u, v, z = project_point(frame, point)
    except Exception:
        return None
    if z <= 0:
        return None
    if not (0 <= math.floor(u) < frame.width and 0 <= math.floor(v) < frame.height):
        return None
    return u, v


def gen_object_movement_qa(
    seq: TrackedSequence,
    groups: list[list[int]],
    kind: str,
    referencing: str,
    rng: np.random.Generator,
    templates: TemplateSet,
    source: str,
    sampler: SamplerConfig | None = None,
    params: GenParams = GenParams(),
) -> QASample:
    """Track-point motion QA: total distance or displacement vector.

    The point comes from a uniformly chosen rigid group (so small moving
    parts are not drowned out by large ones); the frame pair comes from the
    motion-binned dynamic sampler. The point must project inside both
    chosen frames.
    """
    if not groups:
        raise SkipSample("no rigid groups")
    subtask = object_movement_subtask(kind, referencing, source)
    base_sampler = sampler or SamplerConfig()

    for _ in range(params.max_retries):
        group = groups[int(rng.integers(len(groups)))]
        point = int(_pick(rng, group))
        try:
            pairs = sample_dynamic_pairs(
                seq,
                point,
                SamplerConfig(
                    overlap_min=base_sampler.overlap_min,
                    overlap_max=base_sampler.overlap_max,
                    bin_interval=base_sampler.bin_interval,
                    quota=max(base_sampler.quota, 8),
                    non_overlap_quota=0,
                    seed=int(rng.integers(2**63)),
                    dyn_bin_width_m=base_sampler.dyn_bin_width_m,
                ),
            )
        except Exception:
            continue
        if not pairs:
            continue
        t_i, t_j = pairs[int(rng.integers(len(pairs)))]
        frame_i, frame_j = seq.frames[t_i], seq.frames[t_j]
        p_i = seq.trajectories[t_i, point]
        p_j = seq.trajectories[t_j, point]
        uv1 = _in_bounds_projection(frame_i, p_i)
        uv2 = _in_bounds_projection(frame_j, p_j)
        if uv1 is None or uv2 is None:
            continue

        vec, dist = object_displacement(seq, point, t_i, t_j, frame_i)
        slots: dict = {}
        overlays: dict[int, list[DotOverlay]] = {}
        if referencing == REF_DOT:
            overlays[0] = [DotOverlay(uv1[0], uv1[1])]
        else:
            x1, y1 = _norm(uv1[0], uv1[1], frame_i)
            slots.update(x=x1, y=y1)
        if kind == "distance":
            value = to_mm(dist)
            slots["distance"] = value
            gt = GroundTruth(SCALAR_MM, value)
        elif kind == "vector":
            mmvec = [to_mm(c) for c in vec]
            slots.update(dx=mmvec[0], dy=mmvec[1], dz=mmvec[2])
            gt = GroundTruth(VECTOR_3, mmvec)
        else:
            raise ValueError(f"unknown movement kind {kind!r}")

        info = subtask_info(subtask)
        question, answer = _fill(templates, info.template_key, rng, slots)
        return QASample(
            subtask=subtask,
            frame_ids=[frame_i.frame_id, frame_j.frame_id],
            question=question,
            answer=answer,
            ground_truth=gt,
            referencing=referencing,
            overlays=overlays,
            meta={"point_index": point, "t_i": t_i, "t_j": t_j},
        )
    raise SkipSample("no projectable point/pair draw")


# ---------------------------------------------------------------------------
# object size


def gen_object_size_qa(
    obj: ObjectAnnotation,
    coverage_sets: list[list[str]],
    dimension: str,
    rng: np.random.Generator,
    templates: TemplateSet,
) -> QASample:
    """Object extent QA over one minimal covering image set."""
    if not coverage_sets:
        raise SkipSample(f"no coverage set for {obj.category}/{dimension}")
    axis = dimension_axis(dimension, obj.extent())
    value = to_mm(float(obj.extent()[AXIS_INDEX[axis]]))
    frame_ids = list(_pick(rng, coverage_sets))
    images_block = "".join(
        f"Image-{k + 1}: <image>\n" for k in range(len(frame_ids))
    )
    question, answer = _fill(
        templates,
        "object_size",
        rng,
        {"dimension": dimension, "category": obj.category, "value": value},
        images_block=images_block,
    )
    return QASample(
        subtask=f"object_size_{dimension}",
        frame_ids=frame_ids,
        question=question,
        answer=answer,
        ground_truth=GroundTruth(SCALAR_MM, value),
        referencing=REF_SEMANTIC,
        meta={"instance_id": obj.instance_id, "axis": axis},
    )
