"""Procedural scene bundles with closed-form ground truth.

A cube room (interior of an axis-aligned box, +z up) holds lattice points on
its walls and on one or more box-shaped obstacles. Cameras sit on a ring,
looking outward, with per-frame yaw/pitch/height wobble. Depth maps are
exact ray casts against the same geometry, so projection, visibility,
overlap, relative pose, and yaw/pitch are all analytically known and stored
next to the bundle data.

Lattice points whose raster depth test would be marginal in *any* frame
(grazing surfaces, silhouette edges) are dropped at construction, keeping
the analytic segment-vs-box visibility oracle in exact agreement with the
z-buffer semantics the engine implements.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from PIL import Image, ImageDraw

from .geometry import OCCLUSION_EPS_M
from .scene import (
    CameraFrame,
    ObjectAnnotation,
    SceneBundle,
    ScenePointCloud,
    TrackedSequence,
)

# classification margins for dropping ambiguous lattice points
_Z_MARGIN = 0.02
_VIS_MARGIN = 0.5 * OCCLUSION_EPS_M
_OCC_MARGIN = 2.0 * OCCLUSION_EPS_M
_PIX_MARGIN = 0.02


class FixtureError(ValueError):
    """The requested fixture cannot be built cleanly."""


@dataclass(frozen=True)
class BoxObstacle:
    instance_id: int
    category: str
    lo: tuple[float, float, float]
    hi: tuple[float, float, float]


@dataclass(frozen=True)
class StaticFixtureSpec:
    scene_id: str = "cuberoom"
    room: tuple[float, float, float] = (6.0, 6.0, 3.0)
    width: int = 320
    height: int = 240
    focal: float = 320.0
    num_frames: int = 20
    ring_radius: float = 0.55
    base_height: float = 1.5
    height_wobble: float = 0.1
    pitch_base_deg: float = -7.0
    pitch_wobble_deg: float = 4.0
    lattice_spacing: float = 0.4
    obstacles: tuple[BoxObstacle, ...] = (
        BoxObstacle(1, "crate", (4.7, 2.6, 0.0), (5.5, 3.2, 1.0)),
        BoxObstacle(2, "cabinet", (2.5, 4.8, 0.6), (3.1, 5.4, 1.5)),
    )
    seed: int = 7


@dataclass(frozen=True)
class MovingCluster:
    n_points: int
    center: tuple[float, float, float]
    velocity: tuple[float, float, float]  # metres per timestep
    extent: float = 0.3


@dataclass(frozen=True)
class DynamicFixtureSpec:
    scene_id: str = "rigidlab"
    source: str = "ego"
    room: tuple[float, float, float] = (8.0, 8.0, 3.5)
    width: int = 320
    height: int = 240
    focal: float = 320.0
    num_frames: int = 12
    clusters: tuple[MovingCluster, ...] = (
        MovingCluster(8, (3.2, 5.0, 1.4), (0.06, 0.0, 0.0)),
        MovingCluster(8, (4.8, 5.2, 1.2), (-0.04, 0.05, 0.0)),
        MovingCluster(8, (4.0, 6.0, 1.8), (0.0, -0.03, 0.04)),
    )
    camera_pan_deg: float = 0.8  # per-frame yaw drift ("ego" style)
    seed: int = 11


@dataclass
class StaticTruth:
    """Analytic ground truth for a static fixture."""

    yaw_deg: dict[str, float] = field(default_factory=dict)
    pitch_deg: dict[str, float] = field(default_factory=dict)
    positions: dict[str, np.ndarray] = field(default_factory=dict)
    visible_ids: dict[str, set[int]] = field(default_factory=dict)
    # (frame_i, frame_j) -> dict(displacement 3-vector in cam-i axes, distance, overlap)
    pairs: dict[tuple[str, str], dict] = field(default_factory=dict)
    projections: dict[tuple[str, int], tuple[float, float, float]] = field(default_factory=dict)


@dataclass
class DynamicTruth:
    groups: list[list[int]] = field(default_factory=list)
    # (t_i, t_j, point) -> (vector in cam-t_i axes, distance)
    displacements: dict[tuple[int, int, int], tuple[np.ndarray, float]] = field(
        default_factory=dict
    )


def camera_pose(position, yaw_deg: float, pitch_deg: float) -> np.ndarray:
    """Camera-to-world pose for an x-right / y-down / z-forward camera.

    Yaw is the heading of the forward axis in the horizontal plane (CCW from
    +x, seen from +z); pitch is its elevation. Roll is zero.
    """
    psi, theta = math.radians(yaw_deg), math.radians(pitch_deg)
    fwd = np.array(
        [math.cos(theta) * math.cos(psi), math.cos(theta) * math.sin(psi), math.sin(theta)]
    )
    right = np.array([math.sin(psi), -math.cos(psi), 0.0])
    down = np.cross(fwd, right)
    pose = np.eye(4)
    pose[:3, 0], pose[:3, 1], pose[:3, 2] = right, down, fwd
    pose[:3, 3] = np.asarray(position, dtype=np.float64)
    return pose


def _intrinsics(spec) -> np.ndarray:
    return np.array(
        [
            [spec.focal, 0.0, spec.width / 2.0],
            [0.0, spec.focal, spec.height / 2.0],
            [0.0, 0.0, 1.0],
        ]
    )


def _slab_interval(origin: float, d: np.ndarray, lo: float, hi: float):
    """Per-ray (tmin, tmax) of one axis slab; handles zero direction."""
    zero = np.abs(d) < 1e-15
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (lo - origin) / d
        t2 = (hi - origin) / d
    tmin = np.minimum(t1, t2)
    tmax = np.maximum(t1, t2)
    if np.any(zero):
        inside = lo <= origin <= hi
        tmin = np.where(zero, -np.inf if inside else np.inf, tmin)
        tmax = np.where(zero, np.inf if inside else -np.inf, tmax)
    return tmin, tmax


def _box_entry_exit(origin: np.ndarray, dirs: np.ndarray, lo, hi):
    tmin = np.full(dirs.shape[0], -np.inf)
    tmax = np.full(dirs.shape[0], np.inf)
    for axis in range(3):
        a, b = _slab_interval(float(origin[axis]), dirs[:, axis], float(lo[axis]), float(hi[axis]))
        tmin = np.maximum(tmin, a)
        tmax = np.minimum(tmax, b)
    return tmin, tmax


def render_depth(pose: np.ndarray, intrinsics: np.ndarray, width: int, height: int,
                 room, obstacles) -> np.ndarray:
    """Exact camera-z depth of the room interior plus obstacles.

    Rays go through pixel centers; a ray parameterized by its camera-z means
    the hit parameter *is* the stored depth. Output is quantized to whole
    millimetres, matching what survives a bundle round trip.
    """
    fx, fy = intrinsics[0, 0], intrinsics[1, 1]
    cx, cy = intrinsics[0, 2], intrinsics[1, 2]
    us, vs = np.meshgrid(np.arange(width) + 0.5, np.arange(height) + 0.5)
    dirs_cam = np.stack(
        [(us - cx) / fx, (vs - cy) / fy, np.ones_like(us)], axis=-1
    ).reshape(-1, 3)
    r = pose[:3, :3]
    origin = pose[:3, 3]
    dirs = dirs_cam @ r.T

    # camera is inside the room: depth of the empty room is the exit distance
    _, t_room = _box_entry_exit(origin, dirs, (0.0, 0.0, 0.0), room)
    depth = t_room.copy()
    for box in obstacles:
        tin, tout = _box_entry_exit(origin, dirs, box.lo, box.hi)
        hit = (tin <= tout) & (tin > 1e-9)
        depth = np.where(hit, np.minimum(depth, tin), depth)
    depth = depth.reshape(height, width)
    return np.round(depth * 1000.0) / 1000.0


def _segment_occluded(origin: np.ndarray, targets: np.ndarray, obstacles) -> np.ndarray:
    """True where the open segment origin->target crosses an obstacle.

    Boxes are shrunk by 5 mm so that targets on an obstacle's own surface
    never self-occlude; segments merely grazing a box get dropped later by
    the raster-agreement filter.
    """
    d = targets - origin
    occ = np.zeros(len(targets), dtype=bool)
    shrink = 0.005
    for box in obstacles:
        lo = np.asarray(box.lo) + shrink
        hi = np.asarray(box.hi) - shrink
        tin, tout = _box_entry_exit(origin, d, lo, hi)
        occ |= (tin <= tout) & (tin > 1e-9) & (tin < 1.0 - 1e-9)
    return occ


def _lattice(spec: StaticFixtureSpec) -> tuple[np.ndarray, np.ndarray]:
    """Candidate lattice positions and instance ids (walls, floor, obstacles)."""
    lx, ly, lz = spec.room
    s = spec.lattice_spacing
    pts: list[np.ndarray] = []
    inst: list[int] = []

    def grid(a0, a1, b0, b1):
        aa = np.arange(a0 + s / 2, a1, s)
        bb = np.arange(b0 + s / 2, b1, s)
        return np.meshgrid(aa, bb, indexing="ij")

    # four vertical walls
    for fixed_axis, fixed_val, (a_lo, a_hi) in (
        (0, 0.0, (0.0, ly)), (0, lx, (0.0, ly)), (1, 0.0, (0.0, lx)), (1, ly, (0.0, lx)),
    ):
        aa, zz = grid(a_lo, a_hi, 0.0, lz)
        block = np.zeros((aa.size, 3))
        block[:, fixed_axis] = fixed_val
        block[:, 1 - fixed_axis] = aa.ravel()
        block[:, 2] = zz.ravel()
        pts.append(block)
        inst.extend([-1] * aa.size)
    # floor
    xx, yy = grid(0.0, lx, 0.0, ly)
    floor = np.stack([xx.ravel(), yy.ravel(), np.zeros(xx.size)], axis=1)
    pts.append(floor)
    inst.extend([-1] * len(floor))

    # obstacle faces: four verticals plus the top, at a finer pitch with a
    # small inset (points must reach near the edges so a fully seen face can
    # span >= 90% of the true extent, but not sit on raster-fragile corners)
    fine = s / 2
    inset = 0.02

    def face_axis(lo_v, hi_v):
        n = max(2, round((hi_v - lo_v - 2 * inset) / fine) + 1)
        return np.linspace(lo_v + inset, hi_v - inset, n)

    for box in spec.obstacles:
        lo, hi = np.asarray(box.lo), np.asarray(box.hi)
        faces = []
        for axis in (0, 1):
            other = 1 - axis
            aa = face_axis(lo[other], hi[other])
            zz = face_axis(lo[2], hi[2])
            for val in (lo[axis], hi[axis]):
                a_grid, z_grid = np.meshgrid(aa, zz, indexing="ij")
                block = np.zeros((a_grid.size, 3))
                block[:, axis] = val
                block[:, other] = a_grid.ravel()
                block[:, 2] = z_grid.ravel()
                faces.append(block)
        aa = face_axis(lo[0], hi[0])
        bb = face_axis(lo[1], hi[1])
        a_grid, b_grid = np.meshgrid(aa, bb, indexing="ij")
        top = np.stack([a_grid.ravel(), b_grid.ravel(), np.full(a_grid.size, hi[2])], axis=1)
        faces.append(top)
        block = np.concatenate(faces, axis=0)
        pts.append(block)
        inst.extend([box.instance_id] * len(block))

    positions = np.concatenate(pts, axis=0)
    instance_ids = np.asarray(inst, dtype=np.int32)

    # drop wall/floor points sitting inside an obstacle footprint
    keep = np.ones(len(positions), dtype=bool)
    for box in spec.obstacles:
        lo = np.asarray(box.lo) - 1e-6
        hi = np.asarray(box.hi) + 1e-6
        inside = ((positions >= lo) & (positions <= hi)).all(axis=1)
        keep &= ~(inside & (instance_ids == -1))
    return positions[keep], instance_ids[keep]


def _classify(
    frame_pose: np.ndarray,
    intrinsics: np.ndarray,
    width: int,
    height: int,
    depth: np.ndarray,
    positions: np.ndarray,
    obstacles,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-point (visible, ambiguous, (u, v, z)) against one frame.

    "Ambiguous" marks points whose raster depth comparison sits inside the
    occlusion-epsilon gray zone, or which graze the image border or camera
    plane; fixtures drop such points entirely.
    """
    w2c_r = frame_pose[:3, :3].T
    origin = frame_pose[:3, 3]
    p_cam = (positions - origin) @ w2c_r.T
    z = p_cam[:, 2]
    fx, fy = intrinsics[0, 0], intrinsics[1, 1]
    cx, cy = intrinsics[0, 2], intrinsics[1, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(z != 0, fx * p_cam[:, 0] / z + cx, np.inf)
        v = np.where(z != 0, fy * p_cam[:, 1] / z + cy, np.inf)

    ambiguous = np.abs(z) < _Z_MARGIN
    front = z > 0
    finite = np.isfinite(u) & np.isfinite(v)
    near_border = finite & (
        (np.abs(u) < _PIX_MARGIN)
        | (np.abs(u - width) < _PIX_MARGIN)
        | (np.abs(v) < _PIX_MARGIN)
        | (np.abs(v - height) < _PIX_MARGIN)
    )
    ambiguous |= front & near_border

    u_safe = np.clip(np.where(finite, u, -1.0), -1e9, 1e9)
    v_safe = np.clip(np.where(finite, v, -1.0), -1e9, 1e9)
    px = np.floor(u_safe).astype(np.int64)
    py = np.floor(v_safe).astype(np.int64)
    in_bounds = front & (px >= 0) & (px < width) & (py >= 0) & (py < height)

    d_at = np.zeros(len(positions))
    sel = np.nonzero(in_bounds)[0]
    if sel.size:
        d_at[sel] = depth[py[sel], px[sel]]

    seg_occ = _segment_occluded(origin, positions, obstacles)
    visible = in_bounds & ~seg_occ
    # raster depth must agree with the segment test, with margin
    gray = in_bounds & (z - d_at > _VIS_MARGIN) & (z - d_at < _OCC_MARGIN)
    mismatch = in_bounds & (
        (~seg_occ & (z - d_at >= _OCC_MARGIN)) | (seg_occ & (z - d_at <= _VIS_MARGIN))
    )
    ambiguous |= gray | mismatch
    return visible, ambiguous, np.stack([u, v, z], axis=1)


def _point_color(pid: int) -> tuple[int, int, int]:
    h = (pid * 2654435761) & 0xFFFFFF
    return (64 + (h & 0x7F), 64 + ((h >> 8) & 0x7F), 64 + ((h >> 16) & 0x7F))


def _render_rgb(path, width, height, projections, pids, visible) -> None:
    img = Image.new("RGB", (width, height), (200, 198, 192))
    draw = ImageDraw.Draw(img)
    for k in np.nonzero(visible)[0]:
        u, v, _ = projections[k]
        x, y = int(u), int(v)
        draw.ellipse([x - 1, y - 1, x + 1, y + 1], fill=_point_color(int(pids[k])))
    path.parent.mkdir(parents=True, exist_ok=True)
    img.save(path)


def make_static_fixture(
    spec: StaticFixtureSpec = StaticFixtureSpec(), out_root=None
) -> tuple[SceneBundle, StaticTruth]:
    """Build a static cube-room bundle plus its analytic truth.

    When ``out_root`` is given the bundle is also written to disk in the
    standard format (and the returned bundle carries image paths).
    """
    from pathlib import Path

    lx, ly, lz = spec.room
    if min(lx, ly, lz) <= 0:
        raise FixtureError(f"room extents must be positive, got {spec.room}")
    if spec.num_frames < 2 or spec.lattice_spacing <= 0:
        raise FixtureError("need >= 2 frames and positive lattice spacing")
    k = _intrinsics(spec)
    center = np.array([lx / 2.0, ly / 2.0])

    poses: list[np.ndarray] = []
    names: list[str] = []
    yaws: list[float] = []
    pitches: list[float] = []
    for i in range(spec.num_frames):
        angle = 360.0 * i / spec.num_frames
        rad = math.radians(angle)
        pos = np.array(
            [
                center[0] + spec.ring_radius * math.cos(rad),
                center[1] + spec.ring_radius * math.sin(rad),
                spec.base_height + (spec.height_wobble if i % 2 else -spec.height_wobble),
            ]
        )
        yaw = angle if angle <= 180.0 else angle - 360.0  # look outward, in (-180, 180]
        pitch = spec.pitch_base_deg + (spec.pitch_wobble_deg if i % 2 else -spec.pitch_wobble_deg)
        poses.append(camera_pose(pos, yaw, pitch))
        names.append(f"frame{i:04d}")
        yaws.append(yaw)
        pitches.append(pitch)

    positions, instance_ids = _lattice(spec)
    positions = positions.astype(np.float32).astype(np.float64)  # survive f32 storage

    depths = [
        render_depth(pose, k, spec.width, spec.height, spec.room, spec.obstacles)
        for pose in poses
    ]

    # drop points with any marginal frame; keep analytic truth exact
    drop = np.zeros(len(positions), dtype=bool)
    per_frame: list[tuple[np.ndarray, np.ndarray]] = []
    for pose, depth in zip(poses, depths):
        visible, ambiguous, proj = _classify(
            pose, k, spec.width, spec.height, depth, positions, spec.obstacles
        )
        drop |= ambiguous
        per_frame.append((visible, proj))
    keep = ~drop
    if keep.sum() < 50:
        raise FixtureError(f"only {int(keep.sum())} unambiguous lattice points")
    positions = positions[keep]
    instance_ids = instance_ids[keep]
    per_frame = [(vis[keep], proj[keep]) for vis, proj in per_frame]
    point_ids = np.arange(len(positions), dtype=np.uint64)

    truth = StaticTruth()
    frames: list[CameraFrame] = []
    root = Path(out_root) if out_root is not None else None
    for i, (name, pose, depth) in enumerate(zip(names, poses, depths)):
        image_path = None
        if root is not None:
            image_path = root / "rgb" / f"{name}.png"
            visible, proj = per_frame[i]
            _render_rgb(image_path, spec.width, spec.height, proj, point_ids, visible)
        frames.append(
            CameraFrame(
                frame_id=name,
                width=spec.width,
                height=spec.height,
                intrinsics=k,
                extrinsic_c2w=pose,
                depth=depth,
                image_path=image_path,
            )
        )
        truth.yaw_deg[name] = yaws[i]
        truth.pitch_deg[name] = pitches[i]
        truth.positions[name] = pose[:3, 3].copy()
        visible, proj = per_frame[i]
        truth.visible_ids[name] = {int(pid) for pid in point_ids[visible]}
        for pid in np.nonzero(visible)[0]:
            truth.projections[(name, int(pid))] = tuple(float(x) for x in proj[pid])

    for a in range(len(frames)):
        for b in range(len(frames)):
            if a == b:
                continue
            na, nb = names[a], names[b]
            delta = poses[b][:3, 3] - poses[a][:3, 3]
            disp = poses[a][:3, :3].T @ delta
            sa, sb = truth.visible_ids[na], truth.visible_ids[nb]
            union = len(sa | sb)
            truth.pairs[(na, nb)] = {
                "displacement": disp,
                "distance": float(np.linalg.norm(delta)),
                "overlap": (len(sa & sb) / union) if union else 0.0,
            }

    objects = [
        ObjectAnnotation(
            instance_id=box.instance_id,
            category=box.category,
            box_min=np.asarray(box.lo, dtype=np.float64),
            box_max=np.asarray(box.hi, dtype=np.float64),
        )
        for box in spec.obstacles
    ]
    cloud = ScenePointCloud(
        point_ids=point_ids, positions=positions, instance_ids=instance_ids
    )
    bundle = SceneBundle(
        scene_id=spec.scene_id, frames=frames, cloud=cloud, objects=objects,
        source="static", root=root,
    )
    if root is not None:
        from .bundle_io import save_bundle

        save_bundle(bundle, root)
    return bundle, truth


def make_dynamic_fixture(
    spec: DynamicFixtureSpec = DynamicFixtureSpec(), out_root=None
) -> tuple[SceneBundle, DynamicTruth]:
    """Build a tracked-sequence bundle with rigidly moving clusters.

    Every cluster is a rigid blob translating at constant velocity, so each
    pairwise displacement is v * (t_j - t_i) in closed form and the planted
    partition is the segmentation ground truth.
    """
    from pathlib import Path

    rng = np.random.default_rng(spec.seed)
    k = _intrinsics(spec)
    lx, ly, _ = spec.room

    offsets = []
    groups: list[list[int]] = []
    idx = 0
    for cluster in spec.clusters:
        pts = rng.uniform(-cluster.extent / 2, cluster.extent / 2, size=(cluster.n_points, 3))
        offsets.append((cluster, pts))
        groups.append(list(range(idx, idx + cluster.n_points)))
        idx += cluster.n_points
    n_points = idx

    t_steps = spec.num_frames
    traj = np.zeros((t_steps, n_points, 3))
    for t in range(t_steps):
        col = 0
        for cluster, pts in offsets:
            base = np.asarray(cluster.center) + np.asarray(cluster.velocity) * t
            traj[t, col : col + len(pts)] = base + pts
            col += len(pts)
    traj = traj.astype(np.float32).astype(np.float64)
    valid = np.ones((t_steps, n_points), dtype=bool)

    # camera at mid-height near the south wall, looking at the action
    cam_pos = np.array([lx / 2.0, 1.0, 1.6])
    target = traj.reshape(-1, 3).mean(axis=0)
    look = target - cam_pos
    base_yaw = math.degrees(math.atan2(look[1], look[0]))
    base_pitch = math.degrees(math.asin(look[2] / np.linalg.norm(look)))

    frames: list[CameraFrame] = []
    root = Path(out_root) if out_root is not None else None
    for t in range(t_steps):
        yaw = base_yaw + (spec.camera_pan_deg * t if spec.source == "ego" else 0.0)
        pose = camera_pose(cam_pos, yaw, base_pitch)
        depth = render_depth(pose, k, spec.width, spec.height, spec.room, ())
        name = f"frame{t:04d}"
        image_path = None
        if root is not None:
            image_path = root / "rgb" / f"{name}.png"
            w2c_r = pose[:3, :3].T
            p_cam = (traj[t] - pose[:3, 3]) @ w2c_r.T
            u = k[0, 0] * p_cam[:, 0] / p_cam[:, 2] + k[0, 2]
            v = k[1, 1] * p_cam[:, 1] / p_cam[:, 2] + k[1, 2]
            proj = np.stack([u, v, p_cam[:, 2]], axis=1)
            _render_rgb(
                image_path, spec.width, spec.height, proj,
                np.arange(n_points), np.ones(n_points, dtype=bool),
            )
        frames.append(
            CameraFrame(
                frame_id=name, width=spec.width, height=spec.height,
                intrinsics=k, extrinsic_c2w=pose, depth=depth, image_path=image_path,
            )
        )

    # every tracked point must project inside every frame
    for t, frame in enumerate(frames):
        w2c_r = frame.extrinsic_c2w[:3, :3].T
        p_cam = (traj[t] - frame.extrinsic_c2w[:3, 3]) @ w2c_r.T
        if (p_cam[:, 2] <= 0.1).any():
            raise FixtureError("tracked point too close to the camera plane")
        u = k[0, 0] * p_cam[:, 0] / p_cam[:, 2] + k[0, 2]
        v = k[1, 1] * p_cam[:, 1] / p_cam[:, 2] + k[1, 2]
        if (u < 1).any() or (u >= spec.width - 1).any() or (v < 1).any() or (v >= spec.height - 1).any():
            raise FixtureError("tracked point leaves the image; shrink motion or widen FOV")

    truth = DynamicTruth(groups=groups)
    for ti in range(t_steps):
        r_i = frames[ti].extrinsic_c2w[:3, :3]
        for tj in range(ti + 1, t_steps):
            delta = traj[tj] - traj[ti]  # (N, 3)
            vecs = delta @ r_i  # == (R_i^T @ delta^T)^T
            for p in range(n_points):
                truth.displacements[(ti, tj, p)] = (
                    vecs[p].copy(),
                    float(np.linalg.norm(vecs[p])),
                )

    tracks = TrackedSequence(trajectories=traj, frames=frames, valid_mask=valid)
    bundle = SceneBundle(
        scene_id=spec.scene_id, frames=frames, tracks=tracks,
        source=spec.source, root=root,
    )
    if root is not None:
        from .bundle_io import save_bundle

        save_bundle(bundle, root)
    return bundle, truth
