"""Reading and writing the neutral scene-bundle directory format.

Layout:

    <root>/
      manifest.json          scene id, up-axis, source tag, frame table,
                             object boxes, optional cloud/tracks entries
      depth/<frame_id>.png   16-bit single-channel PNG, millimetres, 0 = invalid
      rgb/<frame_id>.png     color image (PNG or JPEG)
      cloud.bin              little-endian records (id u64, xyz 3xf32, instance i32)
      tracks.bin             header + T*N*3 f32 tensor + validity bitmask
                             + per-timestep frame indices

Depth and positions are converted to metres on load. If the manifest declares
an up-axis other than "z", everything world-space is rotated into +z-up.
"""

from __future__ import annotations

import json
import shutil
import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .scene import (
    CameraFrame,
    ObjectAnnotation,
    SceneBundle,
    ScenePointCloud,
    TrackedSequence,
)

MANIFEST_NAME = "manifest.json"
_CLOUD_DTYPE = np.dtype([("id", "<u8"), ("xyz", "<f4", 3), ("inst", "<i4")])
_TRACKS_MAGIC = b"TRK1"

# world rotations that bring the declared up-axis onto +z
_UP_AXIS_FIX = {
    "z": np.eye(3),
    "y": np.array([[1.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]]),
    "x": np.array([[0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]]),
}


class BundleFormatError(ValueError):
    """Bundle directory does not match the expected layout."""


def write_depth_png(path: Path, depth_m: np.ndarray) -> None:
    """Store a metre depth map as 16-bit millimetre PNG (0 = invalid)."""
    mm = np.round(np.clip(depth_m, 0.0, 65.535) * 1000.0)
    mm[~np.isfinite(mm)] = 0
    img = Image.fromarray(mm.astype("<u2"))  # 16-bit grayscale ("I;16")
    path.parent.mkdir(parents=True, exist_ok=True)
    img.save(path)


def read_depth_png(path: Path) -> np.ndarray:
    arr = np.asarray(Image.open(path), dtype=np.float64)
    return arr / 1000.0


def write_point_cloud(path: Path, cloud: ScenePointCloud) -> None:
    rec = np.empty(len(cloud), dtype=_CLOUD_DTYPE)
    rec["id"] = cloud.point_ids
    rec["xyz"] = cloud.positions.astype("<f4")
    rec["inst"] = cloud.instance_ids
    path.parent.mkdir(parents=True, exist_ok=True)
    rec.tofile(path)


def read_point_cloud(path: Path) -> ScenePointCloud:
    rec = np.fromfile(path, dtype=_CLOUD_DTYPE)
    return ScenePointCloud(
        point_ids=rec["id"].copy(),
        positions=rec["xyz"].astype(np.float64),
        instance_ids=rec["inst"].copy(),
    )


def write_tracks(path: Path, trajectories: np.ndarray, valid_mask: np.ndarray,
                 frame_indices: list[int]) -> None:
    t, n, _ = trajectories.shape
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(_TRACKS_MAGIC)
        fh.write(struct.pack("<III", 1, t, n))
        fh.write(trajectories.astype("<f4").tobytes())
        fh.write(np.packbits(valid_mask.reshape(-1).astype(bool)).tobytes())
        fh.write(np.asarray(frame_indices, dtype="<u4").tobytes())


def read_tracks(path: Path) -> tuple[np.ndarray, np.ndarray, list[int]]:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _TRACKS_MAGIC:
            raise BundleFormatError(f"{path}: bad tracks magic {magic!r}")
        version, t, n = struct.unpack("<III", fh.read(12))
        if version != 1:
            raise BundleFormatError(f"{path}: unsupported tracks version {version}")
        traj = np.frombuffer(fh.read(t * n * 3 * 4), dtype="<f4").reshape(t, n, 3)
        nbits = t * n
        mask_bytes = fh.read((nbits + 7) // 8)
        mask = np.unpackbits(np.frombuffer(mask_bytes, dtype=np.uint8))[:nbits]
        idx = np.frombuffer(fh.read(t * 4), dtype="<u4")
    return traj.astype(np.float64), mask.reshape(t, n).astype(bool), [int(i) for i in idx]


def _frame_to_entry(frame: CameraFrame, root: Path) -> dict:
    entry = {
        "frame_id": frame.frame_id,
        "width": frame.width,
        "height": frame.height,
        "intrinsics": np.asarray(frame.intrinsics, dtype=np.float64).reshape(-1).tolist(),
        "extrinsic_c2w": np.asarray(frame.extrinsic_c2w, dtype=np.float64).reshape(-1).tolist(),
        "depth": f"depth/{frame.frame_id}.png",
    }
    if frame.image_path is not None:
        try:
            rel = frame.image_path.relative_to(root)
        except ValueError:
            # image lives outside this root (e.g. re-saving elsewhere): copy it in
            rel = Path("rgb") / f"{frame.frame_id}{frame.image_path.suffix}"
            dst = root / rel
            dst.parent.mkdir(parents=True, exist_ok=True)
            shutil.copyfile(frame.image_path, dst)
        entry["image"] = str(rel)
    return entry


def save_bundle(bundle: SceneBundle, root: Path) -> Path:
    """Write a bundle (assumed already +z-up) to ``root``; returns the root."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    manifest: dict = {
        "scene_id": bundle.scene_id,
        "up_axis": "z",
        "source": bundle.source,
        "frames": [],
    }
    for frame in bundle.frames:
        write_depth_png(root / "depth" / f"{frame.frame_id}.png", frame.depth)
        manifest["frames"].append(_frame_to_entry(frame, root))
    if bundle.cloud is not None:
        write_point_cloud(root / "cloud.bin", bundle.cloud)
        manifest["cloud"] = "cloud.bin"
    if bundle.tracks is not None:
        frame_pos = {f.frame_id: i for i, f in enumerate(bundle.frames)}
        write_tracks(
            root / "tracks.bin",
            bundle.tracks.trajectories,
            bundle.tracks.valid_mask,
            [frame_pos[f.frame_id] for f in bundle.tracks.frames],
        )
        manifest["tracks"] = "tracks.bin"
    if bundle.objects:
        manifest["objects"] = [
            {
                "instance_id": o.instance_id,
                "category": o.category,
                "box_min": np.asarray(o.box_min, dtype=np.float64).tolist(),
                "box_max": np.asarray(o.box_max, dtype=np.float64).tolist(),
            }
            for o in bundle.objects
        ]
    (root / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    return root


def _rotated_frame(frame: CameraFrame, fix4: np.ndarray) -> CameraFrame:
    return CameraFrame(
        frame_id=frame.frame_id,
        width=frame.width,
        height=frame.height,
        intrinsics=frame.intrinsics,
        extrinsic_c2w=fix4 @ frame.extrinsic_c2w,
        depth=frame.depth,
        image_path=frame.image_path,
    )


def load_bundle(root: Path, skip_bad_frames: bool = False) -> SceneBundle:
    """Parse a bundle directory; rotates world data to +z-up if needed.

    With ``skip_bad_frames`` a frame whose depth file is missing is dropped
    (with a warning) instead of failing the whole scene; scenes with tracks
    never drop frames because track timesteps index into the frame table.
    """
    root = Path(root)
    mpath = root / MANIFEST_NAME
    if not mpath.is_file():
        raise BundleFormatError(f"{root}: missing {MANIFEST_NAME}")
    manifest = json.loads(mpath.read_text(encoding="utf-8"))

    up = str(manifest.get("up_axis", "z")).lower()
    if up not in _UP_AXIS_FIX:
        raise BundleFormatError(f"{root}: unsupported up-axis {up!r}")
    fix = _UP_AXIS_FIX[up]
    fix4 = np.eye(4)
    fix4[:3, :3] = fix
    has_tracks = "tracks" in manifest

    frames: list[CameraFrame] = []
    dropped: list[str] = []
    for entry in manifest["frames"]:
        depth_path = root / entry["depth"]
        if not depth_path.is_file():
            if skip_bad_frames and not has_tracks:
                dropped.append(entry["frame_id"])
                continue
            raise BundleFormatError(f"{root}: missing depth file {entry['depth']}")
        frame = CameraFrame(
            frame_id=entry["frame_id"],
            width=int(entry["width"]),
            height=int(entry["height"]),
            intrinsics=np.asarray(entry["intrinsics"], dtype=np.float64).reshape(3, 3),
            extrinsic_c2w=np.asarray(entry["extrinsic_c2w"], dtype=np.float64).reshape(4, 4),
            depth=read_depth_png(depth_path),
            image_path=(root / entry["image"]) if "image" in entry else None,
        )
        if up != "z":
            frame = _rotated_frame(frame, fix4)
        frames.append(frame)
    if dropped:
        import logging

        logging.getLogger(__name__).warning(
            "%s: skipped %d frame(s) with missing depth: %s",
            manifest.get("scene_id", root.name), len(dropped), ", ".join(dropped),
        )

    cloud = None
    if "cloud" in manifest:
        cloud = read_point_cloud(root / manifest["cloud"])
        if up != "z":
            cloud = ScenePointCloud(
                point_ids=cloud.point_ids,
                positions=cloud.positions @ fix.T,
                instance_ids=cloud.instance_ids,
            )

    tracks = None
    if has_tracks:
        traj, mask, frame_idx = read_tracks(root / manifest["tracks"])
        if up != "z":
            traj = traj @ fix.T
        tracks = TrackedSequence(
            trajectories=traj,
            frames=[frames[i] for i in frame_idx],
            valid_mask=mask,
        )

    objects = []
    for entry in manifest.get("objects", []):
        lo = np.asarray(entry["box_min"], dtype=np.float64)
        hi = np.asarray(entry["box_max"], dtype=np.float64)
        if up != "z":
            corners = np.stack([fix @ lo, fix @ hi])
            lo, hi = corners.min(axis=0), corners.max(axis=0)
        objects.append(
            ObjectAnnotation(
                instance_id=int(entry["instance_id"]),
                category=str(entry["category"]),
                box_min=lo,
                box_max=hi,
            )
        )

    return SceneBundle(
        scene_id=str(manifest["scene_id"]),
        frames=frames,
        cloud=cloud,
        tracks=tracks,
        objects=objects,
        source=str(manifest.get("source", "static")),
        root=root,
    )
