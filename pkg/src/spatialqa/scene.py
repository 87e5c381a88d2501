"""Domain types for posed RGB-D scenes, tracked sequences, and objects.

Everything here is immutable after load and safe to share across workers.
Depth maps are metres in memory (16-bit millimetres on disk); non-positive
depth means "no measurement".
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

ROTATION_TOL = 1e-4


@dataclass(frozen=True)
class CameraFrame:
    """One posed RGB-D view."""

    frame_id: str
    width: int
    height: int
    intrinsics: np.ndarray  # 3x3, fx/fy/cx/cy in pixels
    extrinsic_c2w: np.ndarray  # 4x4 camera-to-world
    depth: np.ndarray  # (height, width) metres, <= 0 invalid
    image_path: Path | None = None


@dataclass(frozen=True)
class ScenePointCloud:
    """World-space points with optional instance labels."""

    point_ids: np.ndarray  # (N,) uint64
    positions: np.ndarray  # (N, 3) metres
    instance_ids: np.ndarray  # (N,) int32, -1 = unlabeled

    def __len__(self) -> int:
        return len(self.point_ids)

    def instance_points(self, instance_id: int) -> np.ndarray:
        return self.positions[self.instance_ids == instance_id]


@dataclass(frozen=True)
class TrackedSequence:
    """T x N x 3 world trajectories with per-frame cameras."""

    trajectories: np.ndarray  # (T, N, 3) metres
    frames: list[CameraFrame]  # length T
    valid_mask: np.ndarray  # (T, N) bool

    @property
    def num_frames(self) -> int:
        return self.trajectories.shape[0]

    @property
    def num_points(self) -> int:
        return self.trajectories.shape[1]


@dataclass(frozen=True)
class ObjectAnnotation:
    """Axis-aligned world-space 3D box for one instance."""

    instance_id: int
    category: str
    box_min: np.ndarray  # (3,) metres
    box_max: np.ndarray  # (3,) metres

    def extent(self) -> np.ndarray:
        return np.asarray(self.box_max, dtype=np.float64) - np.asarray(
            self.box_min, dtype=np.float64
        )


@dataclass(frozen=True)
class SceneBundle:
    """A loaded scene: frames plus whichever of cloud/tracks/objects exist."""

    scene_id: str
    frames: list[CameraFrame]
    cloud: ScenePointCloud | None = None
    tracks: TrackedSequence | None = None
    objects: list[ObjectAnnotation] = field(default_factory=list)
    source: str = "static"
    root: Path | None = None


@dataclass(frozen=True)
class Violation:
    """One invariant breach; validation reports these instead of raising."""

    code: str
    subject: str  # frame/point/object identifier
    message: str

    def __str__(self) -> str:
        return f"[{self.code}] {self.subject}: {self.message}"


def _check_frame(frame: CameraFrame) -> list[Violation]:
    out: list[Violation] = []
    k = np.asarray(frame.intrinsics, dtype=np.float64)
    if k.shape != (3, 3):
        out.append(Violation("intrinsics-shape", frame.frame_id, f"shape {k.shape}"))
        return out
    if not np.allclose(k[2], [0.0, 0.0, 1.0], atol=1e-9):
        out.append(
            Violation("intrinsics-last-row", frame.frame_id, f"last row {k[2].tolist()}")
        )
    if not (k[0, 0] > 0 and k[1, 1] > 0):
        out.append(
            Violation(
                "intrinsics-focal", frame.frame_id, f"fx={k[0, 0]}, fy={k[1, 1]} must be > 0"
            )
        )
    e = np.asarray(frame.extrinsic_c2w, dtype=np.float64)
    if e.shape != (4, 4):
        out.append(Violation("extrinsic-shape", frame.frame_id, f"shape {e.shape}"))
        return out
    if not np.allclose(e[3], [0.0, 0.0, 0.0, 1.0], atol=1e-9):
        out.append(
            Violation("extrinsic-last-row", frame.frame_id, f"last row {e[3].tolist()}")
        )
    r = e[:3, :3]
    gram_dev = float(np.abs(r.T @ r - np.eye(3)).max())
    det = float(np.linalg.det(r))
    if gram_dev > ROTATION_TOL or abs(det - 1.0) > 1e-3:
        out.append(
            Violation(
                "rotation-orthonormality",
                frame.frame_id,
                f"max |R^T R - I| = {gram_dev:.3g}, det = {det:.6g}",
            )
        )
    if frame.depth.shape != (frame.height, frame.width):
        out.append(
            Violation(
                "depth-shape",
                frame.frame_id,
                f"depth {frame.depth.shape} vs frame {frame.height}x{frame.width}",
            )
        )
    return out


def validate_scene(bundle: SceneBundle) -> list[Violation]:
    """Collect every invariant violation in a bundle. Empty list == valid.

    Pure: safe to call repeatedly, never raises on bad data.
    """
    out: list[Violation] = []
    for frame in bundle.frames:
        out.extend(_check_frame(frame))

    if bundle.cloud is not None:
        ids = bundle.cloud.point_ids
        uniq, counts = np.unique(ids, return_counts=True)
        for dup in uniq[counts > 1][:10]:
            out.append(
                Violation(
                    "point-id-duplicate",
                    f"point {int(dup)}",
                    f"id appears {int(counts[uniq == dup][0])} times",
                )
            )
        bad = ~np.isfinite(bundle.cloud.positions).all(axis=1)
        for idx in np.nonzero(bad)[0][:10]:
            out.append(
                Violation(
                    "point-nonfinite",
                    f"point {int(ids[idx])}",
                    f"position {bundle.cloud.positions[idx].tolist()}",
                )
            )

    if bundle.tracks is not None:
        tr = bundle.tracks
        if tr.trajectories.shape[0] != len(tr.frames):
            out.append(
                Violation(
                    "tracks-length",
                    bundle.scene_id,
                    f"{tr.trajectories.shape[0]} timesteps vs {len(tr.frames)} frames",
                )
            )
        if tr.valid_mask.shape != tr.trajectories.shape[:2]:
            out.append(
                Violation(
                    "tracks-mask-shape",
                    bundle.scene_id,
                    f"mask {tr.valid_mask.shape} vs trajectories {tr.trajectories.shape[:2]}",
                )
            )
        else:
            bad = tr.valid_mask & ~np.isfinite(tr.trajectories).all(axis=2)
            # cap runaway reports on badly corrupted tensors
            for t, n in list(zip(*np.nonzero(bad)))[:50]:
                out.append(
                    Violation(
                        "track-nonfinite",
                        f"point {int(n)} @ t={int(t)}",
                        "observed position is not finite",
                    )
                )

    for obj in bundle.objects:
        lo = np.asarray(obj.box_min, dtype=np.float64)
        hi = np.asarray(obj.box_max, dtype=np.float64)
        if (hi < lo).any():
            out.append(
                Violation(
                    "box-inverted",
                    f"object {obj.instance_id}",
                    f"max {hi.tolist()} < min {lo.tolist()}",
                )
            )
    return out
