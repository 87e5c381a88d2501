"""Run configuration: a single JSON document, CLI flags override fields.

The manifest records a hash over the *semantic* fields only, so reruns can
be compared: output location, worker count, and cache location do not
change what gets generated.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .qa import GenParams
from .sampling import SamplerConfig
from .segmentation import SegmentationConfig

# fields that do not affect corpus content
_NON_SEMANTIC = {"out_root", "workers", "cache_dir"}


@dataclass
class EngineConfig:
    bundles: list[str] = field(default_factory=list)
    out_root: str = "corpus_out"
    global_seed: int = 0
    workers: int = 1
    frame_stride: int = 10
    train_per_subtask: int = 100
    eval_per_subtask: int = 300
    holdout_scenes: list[str] = field(default_factory=list)
    subtask_quotas: dict[str, int] = field(default_factory=dict)  # train overrides

    overlap_min: float = 6.0
    overlap_max: float = 35.0
    bin_interval: float = 1.0
    non_overlap_quota: int = 0
    dyn_bin_width_m: float = 0.05

    seg_thr: float = 0.1
    seg_smooth_factor: float = 0.01
    seg_min_group_size: int = 5
    seg_max_points: int = 4096

    coverage_tol: float = 0.1
    coverage_max_k: int = 2

    mcq_difficulty: str = "easy"
    tau_still_m: float = 0.01
    tau_rot_deg: float = 1.0
    depth_tie_mm: float = 20.0
    min_separation_px: float = 10.0
    hard_radius_frac: float = 0.05
    max_retries: int = 30

    template_path: str | None = None
    cache_dir: str | None = None

    @classmethod
    def from_file(cls, path: str | Path) -> "EngineConfig":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**doc)

    def with_overrides(self, **overrides) -> "EngineConfig":
        clean = {k: v for k, v in overrides.items() if v is not None}
        return dataclasses.replace(self, **clean)

    def semantic_dict(self) -> dict:
        doc = dataclasses.asdict(self)
        for key in _NON_SEMANTIC:
            doc.pop(key, None)
        return doc

    def config_hash(self) -> str:
        raw = json.dumps(self.semantic_dict(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(raw).hexdigest()[:16]

    def effective_workers(self, cli_value: int | None = None) -> int:
        if cli_value is not None:
            return max(1, cli_value)
        env = os.environ.get("ENGINE_WORKERS")
        if env:
            return max(1, int(env))
        return max(1, self.workers)

    def sampler_config(self, quota: int, seed: int) -> SamplerConfig:
        return SamplerConfig(
            overlap_min=self.overlap_min,
            overlap_max=self.overlap_max,
            bin_interval=self.bin_interval,
            quota=quota,
            non_overlap_quota=self.non_overlap_quota,
            seed=seed,
            dyn_bin_width_m=self.dyn_bin_width_m,
        )

    def segmentation_config(self) -> SegmentationConfig:
        return SegmentationConfig(
            thr=self.seg_thr,
            smooth_factor=self.seg_smooth_factor,
            min_group_size=self.seg_min_group_size,
            max_points=self.seg_max_points,
        )

    def gen_params(self) -> GenParams:
        return GenParams(
            tau_still_m=self.tau_still_m,
            tau_rot_deg=self.tau_rot_deg,
            depth_tie_mm=self.depth_tie_mm,
            min_separation_px=self.min_separation_px,
            hard_radius_frac=self.hard_radius_frac,
            max_retries=self.max_retries,
        )

    def train_quota(self, subtask_id: str) -> int:
        return int(self.subtask_quotas.get(subtask_id, self.train_per_subtask))
