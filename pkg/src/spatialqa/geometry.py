"""Projection, visibility, relative pose, and orientation math.

All cameras follow the indoor-scan convention: x right, y down, z forward,
with extrinsics stored camera-to-world. The world frame is gravity aligned
with +z up (the bundle loader guarantees this).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Added on top of the strict occlusion inequality so that points lying on a
# rasterized surface survive depth-map quantization.
OCCLUSION_EPS_M = 0.02

# Translation components smaller than this carry no direction label.
STILLNESS_EPS_M = 0.01

# Below this horizontal norm of the forward axis, yaw is meaningless.
YAW_DEGENERACY_EPS = 1e-8


class DegenerateProjectionError(ValueError):
    """Point lies (numerically) in the camera plane; no pinhole image exists."""


class DegenerateRotationError(ValueError):
    """Rotation block maps the forward axis to (numerically) zero."""


class TrackingGapError(ValueError):
    """A trajectory point was queried at a time where it is not observed."""


@dataclass(frozen=True)
class RelativePose:
    """Pose of frame j expressed in frame i's camera coordinates."""

    transform: np.ndarray  # 4x4, E_i^-1 @ E_j
    displacement: np.ndarray  # 3-vector, metres, = transform[:3, 3]
    distance: float  # metres, Euclidean norm of displacement


@dataclass(frozen=True)
class OrientationAngles:
    """Heading and elevation of a camera's forward axis in a +z-up world.

    ``yaw_degenerate`` marks poses whose forward axis is (near) vertical:
    yaw is reported as 0.0 there and the pose should be excluded from
    orientation QA.
    """

    yaw: float  # degrees, (-180, 180]
    pitch: float  # degrees, [-90, 90]
    yaw_degenerate: bool = False


def project_point(frame, p_world) -> tuple[float, float, float]:
    """Project a world point into a frame's pixel plane.

    Returns real-valued pixel coordinates (u, v) and the camera-space depth
    (metres). Depth may be <= 0 for points beside/behind the camera; bounds
    and sign handling are the caller's job.
    """
    p = np.asarray(p_world, dtype=np.float64)
    w2c = np.linalg.inv(frame.extrinsic_c2w)
    p_cam = w2c[:3, :3] @ p + w2c[:3, 3]
    z = float(p_cam[2])
    if abs(z) < 1e-9:
        raise DegenerateProjectionError(f"point {p_world!r} projects to z={z}")
    uvw = np.asarray(frame.intrinsics, dtype=np.float64) @ p_cam
    return float(uvw[0] / z), float(uvw[1] / z), z


def project_points(frame, pts_world: np.ndarray):
    """Vectorized projection of an (N, 3) array.

    Returns (u, v, z) arrays; callers must mask z <= 0 themselves.
    Points with z numerically at 0 yield inf/nan coordinates.
    """
    pts = np.asarray(pts_world, dtype=np.float64)
    w2c = np.linalg.inv(frame.extrinsic_c2w)
    p_cam = pts @ w2c[:3, :3].T + w2c[:3, 3]
    z = p_cam[:, 2]
    uvw = p_cam @ np.asarray(frame.intrinsics, dtype=np.float64).T
    with np.errstate(divide="ignore", invalid="ignore"):
        u = uvw[:, 0] / z
        v = uvw[:, 1] / z
    return u, v, z


def visible_mask(frame, pts_world: np.ndarray, eps_occ: float = OCCLUSION_EPS_M) -> np.ndarray:
    """Boolean visibility of each world point in a frame.

    A point is visible when it projects in front of the camera, its floored
    pixel lies inside the image, the depth map is valid there, and the point
    is not occluded: 0 < z < D(u, v) + eps_occ.
    """
    u, v, z = project_points(frame, pts_world)
    ok = z > 0
    # floor() of inf/nan is garbage; only trust pixels where z > 0
    px = np.where(ok, np.floor(np.where(ok, u, 0.0)), -1).astype(np.int64)
    py = np.where(ok, np.floor(np.where(ok, v, 0.0)), -1).astype(np.int64)
    ok &= (px >= 0) & (px < frame.width) & (py >= 0) & (py < frame.height)
    depth = np.asarray(frame.depth)
    d = np.zeros(len(z))
    sel = ok.nonzero()[0]
    if sel.size:
        d[sel] = depth[py[sel], px[sel]]
    ok &= d > 0
    ok &= z < d + eps_occ
    return ok


def is_visible(frame, p_world, eps_occ: float = OCCLUSION_EPS_M) -> bool:
    """Single-point form of :func:`visible_mask`."""
    try:
        u, v, z = project_point(frame, p_world)
    except DegenerateProjectionError:
        return False
    if z <= 0:
        return False
    px, py = math.floor(u), math.floor(v)
    if not (0 <= px < frame.width and 0 <= py < frame.height):
        return False
    d = float(frame.depth[py, px])
    if d <= 0:
        return False
    return z < d + eps_occ


def relative_pose(frame_i, frame_j) -> RelativePose:
    """Relative transform E_i^-1 @ E_j with its translation column."""
    t = np.linalg.inv(frame_i.extrinsic_c2w) @ frame_j.extrinsic_c2w
    d = t[:3, 3].copy()
    return RelativePose(transform=t, displacement=d, distance=float(np.linalg.norm(d)))


def translation_direction_labels(
    d, tau_still: float = STILLNESS_EPS_M
) -> tuple[str, str, str]:
    """Direction labels (lateral, vertical, longitudinal) of a displacement.

    Uses the camera sign convention: +x right, +y down, +z forward.
    Components with magnitude below ``tau_still`` are labeled "none".
    """
    d = np.asarray(d, dtype=np.float64)

    def pick(value: float, pos: str, neg: str) -> str:
        if abs(value) < tau_still:
            return "none"
        return pos if value > 0 else neg

    return (
        pick(float(d[0]), "right", "left"),
        pick(float(d[1]), "down", "up"),
        pick(float(d[2]), "forward", "backward"),
    )


def orientation_angles(extrinsic_c2w) -> OrientationAngles:
    """Yaw and pitch of a camera pose in a +z-up world.

    yaw  = atan2(f_y, f_x) of the world-space forward axis f = R @ (0,0,1)
    pitch = asin(f_z / |f|)
    """
    r = np.asarray(extrinsic_c2w, dtype=np.float64)[:3, :3]
    f = r @ np.array([0.0, 0.0, 1.0])
    norm = float(np.linalg.norm(f))
    if norm < 1e-9:
        raise DegenerateRotationError("forward axis has zero norm")
    pitch = math.degrees(math.asin(max(-1.0, min(1.0, float(f[2]) / norm))))
    horiz = math.hypot(float(f[0]), float(f[1]))
    if horiz < YAW_DEGENERACY_EPS:
        return OrientationAngles(yaw=0.0, pitch=pitch, yaw_degenerate=True)
    yaw = math.degrees(math.atan2(float(f[1]), float(f[0])))
    if yaw <= -180.0:
        yaw += 360.0
    return OrientationAngles(yaw=yaw, pitch=pitch)


def wrap_angle_deg(angle: float) -> float:
    """Wrap an angle in degrees to (-180, 180]."""
    a = math.fmod(angle, 360.0)
    if a > 180.0:
        a -= 360.0
    elif a <= -180.0:
        a += 360.0
    return a


def rotation_angle_deg(rotation: np.ndarray) -> float:
    """Magnitude of a rotation matrix as a single angle in [0, 180] degrees."""
    r = np.asarray(rotation, dtype=np.float64)
    c = (float(np.trace(r[:3, :3])) - 1.0) / 2.0
    return math.degrees(math.acos(max(-1.0, min(1.0, c))))


def normalize_pixel(x: float, y: float, width: int, height: int) -> tuple[int, int]:
    """Resolution-independent pixel coordinates: floor(p / size * 1000).

    Inputs must lie in [0, W) x [0, H); outputs land in [0, 999] with
    (0, 0) at the top-left corner.
    """
    if not (0 <= x < width and 0 <= y < height):
        raise ValueError(f"pixel ({x}, {y}) outside {width}x{height} image")
    return math.floor(x / width * 1000), math.floor(y / height * 1000)


def object_displacement(
    traj, point_index: int, t_i: int, t_j: int, reference_frame
) -> tuple[np.ndarray, float]:
    """World motion of a tracked point between two times, expressed in the
    reference camera's axes.

    Returns (vector, distance) where vector = R_ref^T @ (p_j - p_i) and
    distance is its (rotation-invariant) norm in metres.
    """
    if not (traj.valid_mask[t_i, point_index] and traj.valid_mask[t_j, point_index]):
        raise TrackingGapError(
            f"point {point_index} unobserved at t={t_i} or t={t_j}"
        )
    delta_world = (
        np.asarray(traj.trajectories[t_j, point_index], dtype=np.float64)
        - np.asarray(traj.trajectories[t_i, point_index], dtype=np.float64)
    )
    r = np.asarray(reference_frame.extrinsic_c2w, dtype=np.float64)[:3, :3]
    vec = r.T @ delta_world
    return vec, float(np.linalg.norm(vec))
