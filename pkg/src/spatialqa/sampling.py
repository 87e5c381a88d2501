"""Visible-point sets, overlap ratios, and long-tail balanced pair sampling.

Overlap between two frames is the IoU of their visible-point id sets. Raw
pair populations are heavily long-tailed in overlap (and, for dynamic
sequences, in motion magnitude), so sampling partitions candidates into
fixed-width bins and spreads the quota across them, smallest bins first,
carrying unused quota forward.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import visible_mask
from .scene import CameraFrame, ScenePointCloud, TrackedSequence

log = logging.getLogger(__name__)

_CACHE_MAGIC = b"VCC1"


class InsufficientTrackError(ValueError):
    """Dynamic pair sampling needs a point observed in at least two frames."""


@dataclass(frozen=True)
class PairCandidate:
    """A frame pair with its visible-point overlap."""

    frame_i: str
    frame_j: str
    overlap: float  # IoU in [0, 1]
    co_visible: frozenset[int] = field(default_factory=frozenset)


@dataclass(frozen=True)
class SamplerConfig:
    """Knobs for balanced pair sampling. Overlap bounds are percentages."""

    overlap_min: float = 6.0
    overlap_max: float = 35.0
    bin_interval: float = 1.0
    quota: int = 0
    non_overlap_quota: int = 0
    seed: int = 0
    dyn_bin_width_m: float = 0.05

    def __post_init__(self) -> None:
        if not (0 <= self.overlap_min < self.overlap_max <= 100):
            raise ValueError("need 0 <= overlap_min < overlap_max <= 100")
        if self.bin_interval <= 0:
            raise ValueError("bin_interval must be positive")


def visible_point_set(frame: CameraFrame, cloud: ScenePointCloud) -> set[int]:
    """Ids of every cloud point visible in the frame."""
    if len(cloud) == 0:
        return set()
    mask = visible_mask(frame, cloud.positions)
    return {int(pid) for pid in cloud.point_ids[mask]}


def overlap_ratio(p_i: set[int], p_j: set[int]) -> float:
    """IoU of two visibility sets; two empty sets overlap 0 by convention."""
    union = len(p_i | p_j)
    if union == 0:
        return 0.0
    return len(p_i & p_j) / union


def enumerate_pair_candidates(
    frames: list[CameraFrame],
    cloud: ScenePointCloud,
    stride: int = 10,
    visibility: dict[str, set[int]] | None = None,
) -> list[PairCandidate]:
    """All (i < j) pairs over every ``stride``-th frame, with overlaps.

    ``visibility`` may carry precomputed per-frame id sets (e.g. from a
    cache); missing frames are computed on the fly.
    """
    picked = frames[::stride]
    vis: list[set[int]] = []
    for f in picked:
        if visibility is not None and f.frame_id in visibility:
            vis.append(visibility[f.frame_id])
        else:
            vis.append(visible_point_set(f, cloud))
    out = []
    for a in range(len(picked)):
        for b in range(a + 1, len(picked)):
            inter = vis[a] & vis[b]
            out.append(
                PairCandidate(
                    frame_i=picked[a].frame_id,
                    frame_j=picked[b].frame_id,
                    overlap=overlap_ratio(vis[a], vis[b]),
                    co_visible=frozenset(inter),
                )
            )
    return out


def _allocate_from_bins(
    bins: list[list], quota: int, rng: np.random.Generator
) -> tuple[list, int]:
    """Spread ``quota`` across occupied bins, smallest first, carrying leftovers.

    ``bins`` must be ordered by ascending bin value; the even split (with the
    remainder going to the earliest bins) happens in that order, then bins are
    drained in ascending-size order.
    """
    n = len(bins)
    quotas = [quota // n] * n
    for i in range(quota % n):
        quotas[i] += 1
    order = sorted(range(n), key=lambda i: len(bins[i]))
    taken: list = []
    leftover = 0
    for i in order:
        group = bins[i]
        current = quotas[i] + leftover
        if len(group) <= current:
            taken.extend(group)
            leftover = current - len(group)
        else:
            idx = rng.choice(len(group), size=current, replace=False)
            taken.extend(group[k] for k in idx)
            leftover = 0
    return taken, leftover


def _bin_index(value: float, low: float, width: float, nbins: int) -> int:
    """Right-closed bins ((a, a+w]) with the lowest edge included in bin 0.

    Returns -1 for values outside [low, low + nbins * width].
    """
    if value < low or value > low + nbins * width:
        return -1
    if value == low:
        return 0
    idx = int(np.ceil((value - low) / width)) - 1
    return min(max(idx, 0), nbins - 1)


def sample_pairs_balanced(
    candidates: list[PairCandidate], cfg: SamplerConfig
) -> list[PairCandidate]:
    """Balanced sample of pair candidates by overlap bins.

    Zero-overlap pairs are drawn separately (up to ``non_overlap_quota``);
    everything else lands in ``bin_interval``-percent bins over
    [overlap_min, overlap_max], where the quota is split evenly with the
    remainder on the earliest bins and bins are drained smallest-first,
    passing unused quota onward. Deterministic for a fixed seed.
    """
    rng = np.random.default_rng(cfg.seed)
    zero = [c for c in candidates if c.overlap == 0.0]
    nonzero = [c for c in candidates if c.overlap != 0.0]

    if len(zero) <= cfg.non_overlap_quota:
        sampled_zero = list(zero)
    else:
        idx = rng.choice(len(zero), size=cfg.non_overlap_quota, replace=False)
        sampled_zero = [zero[k] for k in idx]

    span = cfg.overlap_max - cfg.overlap_min
    nbins = int(np.ceil(round(span / cfg.bin_interval, 9)))
    bins: dict[int, list[PairCandidate]] = {}
    for c in nonzero:
        b = _bin_index(c.overlap * 100.0, cfg.overlap_min, cfg.bin_interval, nbins)
        if b >= 0:
            bins.setdefault(b, []).append(c)
    if not bins or cfg.quota <= 0:
        return sampled_zero

    ordered = [bins[k] for k in sorted(bins)]
    taken, leftover = _allocate_from_bins(ordered, cfg.quota, rng)
    if leftover > 0:
        log.warning("balanced sampler: %d of %d quota unused", leftover, cfg.quota)
    return taken + sampled_zero


def sample_dynamic_pairs(
    seq: TrackedSequence, point_index: int, cfg: SamplerConfig
) -> list[tuple[int, int]]:
    """Balanced (t_i, t_j) pairs for one tracked point, binned by how far the
    point travelled between the two times."""
    valid_ts = np.nonzero(seq.valid_mask[:, point_index])[0]
    if len(valid_ts) < 2:
        raise InsufficientTrackError(
            f"point {point_index} observed in {len(valid_ts)} frame(s)"
        )
    pos = seq.trajectories[:, point_index, :]
    pairs: list[tuple[int, int]] = []
    dists: list[float] = []
    for a in range(len(valid_ts)):
        for b in range(a + 1, len(valid_ts)):
            ti, tj = int(valid_ts[a]), int(valid_ts[b])
            pairs.append((ti, tj))
            dists.append(float(np.linalg.norm(pos[tj] - pos[ti])))

    rng = np.random.default_rng(cfg.seed)
    width = cfg.dyn_bin_width_m
    dmax = max(dists)
    nbins = max(1, int(np.ceil(dmax / width)))
    bins: dict[int, list[tuple[int, int]]] = {}
    for pair, d in zip(pairs, dists):
        b = _bin_index(d, 0.0, width, nbins)
        bins.setdefault(b, []).append(pair)
    if cfg.quota <= 0:
        return []
    ordered = [bins[k] for k in sorted(bins)]
    taken, leftover = _allocate_from_bins(ordered, cfg.quota, rng)
    if leftover > 0:
        log.debug("dynamic sampler: %d of %d quota unused", leftover, cfg.quota)
    return taken


# ---------------------------------------------------------------------------
# per-scene visibility/overlap cache


def save_visibility_cache(
    path: Path,
    stride: int,
    visibility: dict[str, set[int]],
    pairs: list[PairCandidate],
) -> None:
    """Persist per-frame visible-id sets plus pair overlaps.

    Binary, versioned; co-visible sets are recomputable from the id sets so
    only overlaps are stored per pair.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(_CACHE_MAGIC)
        fh.write(struct.pack("<II", stride, len(visibility)))
        for frame_id in sorted(visibility):
            raw = frame_id.encode("utf-8")
            ids = np.asarray(sorted(visibility[frame_id]), dtype="<u8")
            fh.write(struct.pack("<II", len(raw), len(ids)))
            fh.write(raw)
            fh.write(ids.tobytes())
        fh.write(struct.pack("<I", len(pairs)))
        for c in pairs:
            for fid in (c.frame_i, c.frame_j):
                raw = fid.encode("utf-8")
                fh.write(struct.pack("<I", len(raw)))
                fh.write(raw)
            fh.write(struct.pack("<d", c.overlap))


def load_visibility_cache(
    path: Path, stride: int
) -> tuple[dict[str, set[int]], list[PairCandidate]] | None:
    """Load a cache written by :func:`save_visibility_cache`.

    Returns None when the file is absent, corrupt, or was built with a
    different stride (callers then recompute).
    """
    path = Path(path)
    if not path.is_file():
        return None
    try:
        with open(path, "rb") as fh:
            if fh.read(4) != _CACHE_MAGIC:
                return None
            file_stride, n_frames = struct.unpack("<II", fh.read(8))
            if file_stride != stride:
                return None
            visibility: dict[str, set[int]] = {}
            for _ in range(n_frames):
                nraw, nids = struct.unpack("<II", fh.read(8))
                frame_id = fh.read(nraw).decode("utf-8")
                ids = np.frombuffer(fh.read(nids * 8), dtype="<u8")
                visibility[frame_id] = {int(i) for i in ids}
            (n_pairs,) = struct.unpack("<I", fh.read(4))
            pairs = []
            for _ in range(n_pairs):
                fids = []
                for _ in range(2):
                    (nraw,) = struct.unpack("<I", fh.read(4))
                    fids.append(fh.read(nraw).decode("utf-8"))
                (ov,) = struct.unpack("<d", fh.read(8))
                inter = visibility[fids[0]] & visibility[fids[1]]
                pairs.append(
                    PairCandidate(
                        frame_i=fids[0],
                        frame_j=fids[1],
                        overlap=ov,
                        co_visible=frozenset(inter),
                    )
                )
        return visibility, pairs
    except (struct.error, KeyError, UnicodeDecodeError):
        return None
