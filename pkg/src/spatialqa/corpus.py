"""Corpus assembly: drive the generators over scene bundles and emit
train/eval JSONL plus a manifest.

Scenes are independent work units (optionally spread over a process pool);
inside a scene every (split, subtask) stream owns an rng seeded from
(global_seed, scene_id, subtask, split), so output is byte-identical across
reruns and worker counts. Eval samples come exclusively from holdout
scenes.
"""

from __future__ import annotations

import hashlib
import json
import logging
import shutil
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .annotate import render_annotations
from .bundle_io import load_bundle
from .config import EngineConfig
from .coverage import AXIS_INDEX, CoverageQuery, bfs_min_coverage, dimension_axis
from .geometry import visible_mask
from .qa import (
    QASample,
    SkipSample,
    gen_camera_movement_qa,
    gen_correspondence_qa,
    gen_depth_qa,
    gen_object_movement_qa,
    gen_object_size_qa,
)
from .sampling import (
    enumerate_pair_candidates,
    load_visibility_cache,
    sample_pairs_balanced,
    save_visibility_cache,
    visible_point_set,
)
from .scene import validate_scene
from .segmentation import segment_sequence
from .subtasks import ALL_SUBTASKS, REF_COORD, REF_DOT, REGISTRY, SubtaskInfo
from .templates import load_template_set

log = logging.getLogger(__name__)

SPLITS = ("train", "eval")


@dataclass(frozen=True)
class SplitPolicy:
    """Scene-disjoint split: holdout scenes feed eval, the rest feed train."""

    holdout_scenes: frozenset[str]
    eval_per_subtask: int = 300

    def split_of(self, scene_id: str) -> str:
        return "eval" if scene_id in self.holdout_scenes else "train"


@dataclass(frozen=True)
class SceneInfo:
    scene_id: str
    root: Path
    source: str
    has_cloud: bool
    has_tracks: bool
    has_objects: bool


@dataclass
class SceneResult:
    scene_id: str
    samples: dict[str, list[dict]] = field(default_factory=lambda: {s: [] for s in SPLITS})
    shortfalls: dict[str, dict[str, int]] = field(
        default_factory=lambda: {s: {} for s in SPLITS}
    )
    error: str | None = None


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from arbitrary string-able parts."""
    raw = "\x1f".join(str(p) for p in parts).encode("utf-8")
    return int.from_bytes(hashlib.sha256(raw).digest()[:8], "little") >> 1


def discover_scenes(
    bundle_roots: list[str | Path],
) -> tuple[list[SceneInfo], dict[str, str]]:
    """Find bundle directories (given directly or one level down).

    Directories whose manifest cannot be parsed are reported in the error
    map (keyed by directory name) instead of aborting the run.
    """
    roots: list[Path] = []
    for entry in bundle_roots:
        p = Path(entry)
        if (p / "manifest.json").is_file():
            roots.append(p)
        elif p.is_dir():
            roots.extend(sorted(d for d in p.iterdir() if (d / "manifest.json").is_file()))
        else:
            raise FileNotFoundError(f"bundle root {p} does not exist")
    infos = []
    errors: dict[str, str] = {}
    for root in roots:
        try:
            doc = json.loads((root / "manifest.json").read_text(encoding="utf-8"))
            infos.append(
                SceneInfo(
                    scene_id=str(doc["scene_id"]),
                    root=root,
                    source=str(doc.get("source", "static")),
                    has_cloud="cloud" in doc,
                    has_tracks="tracks" in doc,
                    has_objects=bool(doc.get("objects")),
                )
            )
        except (json.JSONDecodeError, KeyError) as exc:
            errors[root.name] = f"unreadable manifest: {exc}"
    infos.sort(key=lambda s: s.scene_id)
    seen = set()
    for info in infos:
        if info.scene_id in seen:
            raise ValueError(f"duplicate scene id {info.scene_id!r}")
        seen.add(info.scene_id)
    return infos, errors


def _subtask_eligible(info: SubtaskInfo, scene: SceneInfo) -> bool:
    if info.family in ("depth", "correspondence", "camera"):
        return scene.has_cloud
    if info.family == "object_size":
        return scene.has_cloud and scene.has_objects
    if info.family == "object_movement":
        return scene.has_tracks and info.subtask_id.endswith(f"_{scene.source}")
    raise ValueError(info.family)


def plan_allocations(
    scenes: list[SceneInfo], cfg: EngineConfig, policy: SplitPolicy
) -> tuple[dict[str, list[tuple[str, str, int]]], dict, list[str]]:
    """Per-scene (split, subtask, count) work lists.

    Quotas are split evenly over eligible scenes with the remainder on the
    first scenes (scene ids sort the order). Returns (per-scene work,
    unassignable quota per split/subtask, skipped subtask ids).
    """
    work: dict[str, list[tuple[str, str, int]]] = {s.scene_id: [] for s in scenes}
    unassigned: dict[str, dict[str, int]] = {s: {} for s in SPLITS}
    skipped: list[str] = []
    for subtask in ALL_SUBTASKS:
        info = REGISTRY[subtask]
        if cfg.train_quota(subtask) <= 0:
            # an explicitly zeroed subtask disappears from both splits
            skipped.append(subtask)
            continue
        for split in SPLITS:
            quota = cfg.train_quota(subtask) if split == "train" else policy.eval_per_subtask
            if quota <= 0:
                continue
            eligible = [
                s for s in scenes
                if policy.split_of(s.scene_id) == split and _subtask_eligible(info, s)
            ]
            if not eligible:
                unassigned[split][subtask] = quota
                continue
            base, rem = divmod(quota, len(eligible))
            for i, scene in enumerate(eligible):
                count = base + (1 if i < rem else 0)
                if count:
                    work[scene.scene_id].append((split, subtask, count))
    return work, unassigned, skipped


class _Cycler:
    """Deterministic sampler over a pool: reshuffled pass after pass."""

    def __init__(self, items, rng: np.random.Generator):
        self._items = list(items)
        self._rng = rng
        self._queue: list = []

    def __bool__(self) -> bool:
        return bool(self._items)

    def next(self):
        if not self._queue:
            order = self._rng.permutation(len(self._items))
            self._queue = [self._items[int(i)] for i in order]
        return self._queue.pop(0)


class _ImageStore:
    """Copies raw frames / renders annotated ones under out_root/images."""

    def __init__(self, out_root: Path, scene_id: str):
        self.out_root = out_root
        self.dir = out_root / "images" / scene_id
        self._copied: set[str] = set()

    def raw(self, frame) -> str:
        if frame.image_path is None:
            raise SkipSample(f"frame {frame.frame_id} has no RGB image")
        suffix = frame.image_path.suffix or ".png"
        rel = f"images/{self.dir.name}/{frame.frame_id}{suffix}"
        if frame.frame_id not in self._copied:
            dst = self.out_root / rel
            dst.parent.mkdir(parents=True, exist_ok=True)
            shutil.copyfile(frame.image_path, dst)
            self._copied.add(frame.frame_id)
        return rel

    def annotated(self, frame, overlays, sample_id: str, slot: int) -> str:
        if frame.image_path is None:
            raise SkipSample(f"frame {frame.frame_id} has no RGB image")
        rel = f"images/{self.dir.name}/{sample_id}-{slot}.png"
        dst = self.out_root / rel
        dst.parent.mkdir(parents=True, exist_ok=True)
        with Image.open(frame.image_path) as img:
            render_annotations(img, overlays).save(dst)
        return rel


def _sample_to_row(
    sample: QASample, sample_id: str, frames_by_id: dict, store: _ImageStore,
    scene: SceneInfo, seed: int, extra_meta: dict,
) -> dict:
    sample.sample_id = sample_id
    images = []
    for slot, frame_id in enumerate(sample.frame_ids):
        frame = frames_by_id[frame_id]
        if slot in sample.overlays:
            images.append(store.annotated(frame, sample.overlays[slot], sample_id, slot))
        else:
            images.append(store.raw(frame))
    answer_frame = frames_by_id[sample.frame_ids[-1]]
    meta = {
        "scene_id": scene.scene_id,
        "source": scene.source,
        "seed": seed,
        "image_width": answer_frame.width,
        "image_height": answer_frame.height,
        "frame_ids": sample.frame_ids,
    }
    meta.update(extra_meta)
    meta.update(sample.meta)
    return {
        "sample_id": sample_id,
        "subtask": sample.subtask,
        "images": images,
        "question": sample.question,
        "answer": sample.answer,
        "ground_truth": sample.ground_truth.to_json(),
        "referencing": sample.referencing,
        "meta": meta,
    }


def generate_scene(
    scene: SceneInfo, allocations: list[tuple[str, str, int]], cfg: EngineConfig
) -> SceneResult:
    """Produce every allocated sample for one scene. Top-level and picklable
    so a process pool can run scenes in parallel."""
    result = SceneResult(scene_id=scene.scene_id)
    try:
        bundle = load_bundle(scene.root, skip_bad_frames=True)
        violations = validate_scene(bundle)
        if violations:
            result.error = f"{len(violations)} invariant violation(s): {violations[0]}"
            return result
        templates = load_template_set(cfg.template_path)
        out_root = Path(cfg.out_root)
        store = _ImageStore(out_root, scene.scene_id)
        frames_by_id = {f.frame_id: f for f in bundle.frames}
        params = cfg.gen_params()

        candidates = None
        strided_frames = bundle.frames[:: cfg.frame_stride]
        if bundle.cloud is not None and len(strided_frames) >= 2:
            cache_path = None
            cached = None
            if cfg.cache_dir:
                cache_path = Path(cfg.cache_dir) / f"{scene.scene_id}.viscache"
                cached = load_visibility_cache(cache_path, cfg.frame_stride)
            if cached is not None:
                _, candidates = cached
            else:
                vis = {
                    f.frame_id: visible_point_set(f, bundle.cloud) for f in strided_frames
                }
                candidates = enumerate_pair_candidates(
                    strided_frames, bundle.cloud, stride=1, visibility=vis
                )
                if cache_path is not None:
                    save_visibility_cache(cache_path, cfg.frame_stride, vis, candidates)

        groups = None
        if bundle.tracks is not None:
            groups = segment_sequence(bundle.tracks, cfg.segmentation_config())

        coverage_sets: dict[tuple[int, str], list[list[str]]] = {}
        if bundle.cloud is not None and bundle.objects:
            for obj in bundle.objects:
                obj_mask = bundle.cloud.instance_ids == obj.instance_id
                obj_points = bundle.cloud.positions[obj_mask]
                if not len(obj_points):
                    continue
                per_image = {
                    f.frame_id: visible_mask(f, obj_points) for f in strided_frames
                }
                extent = obj.extent()
                for dimension in ("height", "width", "length"):
                    axis = dimension_axis(dimension, extent)
                    target = float(extent[AXIS_INDEX[axis]])
                    if target <= 0:
                        continue
                    query = CoverageQuery(
                        axis=axis, target_dim=target,
                        tol=cfg.coverage_tol, max_k=cfg.coverage_max_k,
                    )
                    sets = bfs_min_coverage(obj_points, per_image, query)
                    if sets:
                        coverage_sets[(obj.instance_id, dimension)] = sets

        order = {s: i for i, s in enumerate(ALL_SUBTASKS)}
        for split, subtask, count in sorted(
            allocations, key=lambda a: (a[0], order[a[1]])
        ):
            info = REGISTRY[subtask]
            seed = derive_seed(cfg.global_seed, scene.scene_id, subtask, split)
            rng = np.random.default_rng(seed)
            sampled_pairs = None
            if info.family in ("correspondence", "camera") and candidates:
                # oversample for draw diversity, but never past the in-range
                # population (requesting more would only warn about leftovers)
                in_range = sum(
                    1 for c in candidates
                    if c.overlap != 0.0
                    and cfg.overlap_min <= c.overlap * 100.0 <= cfg.overlap_max
                )
                pool = sample_pairs_balanced(
                    candidates,
                    cfg.sampler_config(
                        quota=min(max(count * 3, 16), max(in_range, 1)),
                        seed=derive_seed(cfg.global_seed, scene.scene_id, subtask, split, "pairs"),
                    ),
                )
                sampled_pairs = _Cycler(pool, rng)

            made = 0
            failures = 0
            while made < count and failures < params.max_retries:
                try:
                    sample, extra = _one_sample(
                        info, bundle, frames_by_id, candidates, sampled_pairs,
                        groups, coverage_sets, rng, templates, cfg, params, scene,
                    )
                except SkipSample:
                    failures += 1
                    continue
                sample_id = f"{scene.scene_id}-{subtask}-{split}-{made:05d}"
                result.samples[split].append(
                    _sample_to_row(sample, sample_id, frames_by_id, store, scene, seed, extra)
                )
                made += 1
                failures = 0
            if made < count:
                result.shortfalls[split][subtask] = count - made
    except Exception as exc:  # scene-level degradation, run continues
        result.error = f"{type(exc).__name__}: {exc}"
    return result


def _one_sample(
    info: SubtaskInfo, bundle, frames_by_id, candidates, sampled_pairs,
    groups, coverage_sets, rng, templates, cfg: EngineConfig, params, scene,
):
    """Dispatch one generation attempt for a subtask; returns (sample, meta)."""
    if info.family == "depth":
        frame = bundle.frames[int(rng.integers(len(bundle.frames)))]
        mode = "value" if "value" in info.subtask_id else "comparison"
        sample = gen_depth_qa(
            frame, bundle.cloud, mode, info.referencing, rng, templates, params
        )
        return sample, {}

    if info.family == "correspondence":
        if not sampled_pairs:
            raise SkipSample("no pairs in overlap range")
        pair = sampled_pairs.next()
        mode = "mcq" if info.subtask_id.endswith("mcq") else "coordinate"
        sample = gen_correspondence_qa(
            pair, frames_by_id[pair.frame_i], frames_by_id[pair.frame_j], bundle.cloud,
            mode, rng, templates, difficulty=cfg.mcq_difficulty, params=params,
        )
        return sample, {"overlap": pair.overlap}

    if info.family == "camera":
        if not sampled_pairs:
            raise SkipSample("no pairs in overlap range")
        pair = sampled_pairs.next()
        kind = info.subtask_id.removeprefix("camera_")
        sample = gen_camera_movement_qa(
            frames_by_id[pair.frame_i], frames_by_id[pair.frame_j],
            kind, rng, templates, params,
        )
        return sample, {"overlap": pair.overlap}

    if info.family == "object_movement":
        if not groups:
            raise SkipSample("no rigid groups")
        kind = "distance" if "distance" in info.subtask_id else "vector"
        referencing = REF_DOT if info.referencing == REF_DOT else REF_COORD
        sample = gen_object_movement_qa(
            bundle.tracks, groups, kind, referencing, rng, templates,
            source=scene.source,
            sampler=cfg.sampler_config(quota=16, seed=int(rng.integers(2**62))),
            params=params,
        )
        return sample, {}

    if info.family == "object_size":
        dimension = info.subtask_id.split("_")[-1]
        usable = [
            (obj, coverage_sets[(obj.instance_id, dimension)])
            for obj in bundle.objects
            if (obj.instance_id, dimension) in coverage_sets
        ]
        if not usable:
            raise SkipSample(f"no coverable object for {dimension}")
        obj, sets = usable[int(rng.integers(len(usable)))]
        sample = gen_object_size_qa(obj, sets, dimension, rng, templates)
        return sample, {}

    raise ValueError(info.family)


def emit_corpus(cfg: EngineConfig, policy: SplitPolicy | None = None) -> dict:
    """Run the full pipeline; returns the manifest (also written to disk)."""
    if policy is None:
        policy = SplitPolicy(
            holdout_scenes=frozenset(cfg.holdout_scenes),
            eval_per_subtask=cfg.eval_per_subtask,
        )
    load_template_set(cfg.template_path)  # fail fast on template problems
    scenes, discovery_errors = discover_scenes(cfg.bundles)
    work, unassigned, skipped = plan_allocations(scenes, cfg, policy)

    out_root = Path(cfg.out_root)
    out_root.mkdir(parents=True, exist_ok=True)

    workers = cfg.effective_workers()
    jobs = [(scene, work[scene.scene_id]) for scene in scenes]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_job, [(s, a, cfg) for s, a in jobs]))
    else:
        results = [_run_job((s, a, cfg)) for s, a in jobs]

    by_scene = {r.scene_id: r for r in results}
    counts = {s: {} for s in SPLITS}
    shortfalls = {s: {} for s in SPLITS}
    scene_errors = dict(discovery_errors)
    order = {s: i for i, s in enumerate(ALL_SUBTASKS)}
    for split in SPLITS:
        rows = []
        for scene in scenes:
            r = by_scene[scene.scene_id]
            if r.error:
                scene_errors[scene.scene_id] = r.error
                continue
            rows.extend(r.samples[split])
            for subtask, n in r.shortfalls[split].items():
                shortfalls[split][subtask] = shortfalls[split].get(subtask, 0) + n
        rows.sort(key=lambda row: (order[row["subtask"]], row["sample_id"]))
        path = out_root / f"{split}.jsonl"
        with open(path, "w", encoding="utf-8") as fh:
            for row in rows:
                fh.write(json.dumps(row, sort_keys=True) + "\n")
                counts[split][row["subtask"]] = counts[split].get(row["subtask"], 0) + 1
        # quota that never reached a scene counts as shortfall too
        for subtask, n in unassigned[split].items():
            shortfalls[split][subtask] = shortfalls[split].get(subtask, 0) + n

    manifest = {
        "format_version": 1,
        "config_hash": cfg.config_hash(),
        "global_seed": cfg.global_seed,
        "scenes": {
            "train": [s.scene_id for s in scenes if policy.split_of(s.scene_id) == "train"],
            "eval": [s.scene_id for s in scenes if policy.split_of(s.scene_id) == "eval"],
        },
        "counts": counts,
        "shortfalls": {s: dict(sorted(v.items())) for s, v in shortfalls.items()},
        "skipped_subtasks": sorted(set(skipped)),
        "scene_errors": dict(sorted(scene_errors.items())),
        "files": {"train": "train.jsonl", "eval": "eval.jsonl"},
    }
    (out_root / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return manifest


def _run_job(job) -> SceneResult:
    scene, allocations, cfg = job
    return generate_scene(scene, allocations, cfg)
