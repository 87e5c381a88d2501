"""Rigid-body segmentation of tracked point clouds.

Points moving together keep their pairwise distances; accumulating
|distance change| between consecutive timesteps therefore yields ~0 inside
a rigid group and grows across groups. Average-linkage hierarchical
clustering on the accumulated matrix, cut at a fixed threshold, recovers
the groups.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial.distance import pdist, squareform


class InsufficientFramesError(ValueError):
    """Segmentation needs at least two timesteps."""


@dataclass(frozen=True)
class SegmentationConfig:
    thr: float = 0.1  # clustering cut distance
    smooth_factor: float = 0.01  # metres; smaller distance changes are noise
    min_group_size: int = 5
    max_points: int = 4096  # larger clouds are subsampled evenly

    def __post_init__(self) -> None:
        if self.thr <= 0:
            raise ValueError("thr must be positive")
        if self.smooth_factor < 0:
            raise ValueError("smooth_factor must be >= 0")
        if self.min_group_size < 1:
            raise ValueError("min_group_size must be >= 1")


def smooth_distance_changes(
    dist_t: np.ndarray, dist_prev: np.ndarray, smooth_factor: float = 0.01
) -> np.ndarray:
    """|dist_t - dist_prev| with sub-threshold changes zeroed out."""
    dist_t = np.asarray(dist_t, dtype=np.float64)
    dist_prev = np.asarray(dist_prev, dtype=np.float64)
    if dist_t.shape != dist_prev.shape:
        raise ValueError(f"shape mismatch: {dist_t.shape} vs {dist_prev.shape}")
    diff = np.abs(dist_t - dist_prev)
    return np.where(diff > smooth_factor, diff, 0.0)


def _condensed_valid_pairs(valid_t: np.ndarray, valid_prev: np.ndarray, n: int) -> np.ndarray:
    both = valid_t & valid_prev
    iu, ju = np.triu_indices(n, k=1)
    return both[iu] & both[ju]


def segment(
    trajectories: np.ndarray,
    cfg: SegmentationConfig = SegmentationConfig(),
    valid_mask: np.ndarray | None = None,
) -> list[list[int]]:
    """Partition tracked points into rigid groups.

    ``trajectories`` is (T, N, 3). Pairs where either point is unobserved at
    either end of a timestep contribute no loss for that step. Groups smaller
    than ``cfg.min_group_size`` are dropped; the returned groups are sorted by
    their smallest member and are disjoint subsets of range(N).
    """
    traj = np.asarray(trajectories, dtype=np.float64)
    t_total, n, _ = traj.shape
    if t_total < 2:
        raise InsufficientFramesError(f"got {t_total} timesteps, need >= 2")
    if valid_mask is None:
        valid_mask = np.ones((t_total, n), dtype=bool)
    valid_mask = np.asarray(valid_mask, dtype=bool)

    keep = np.arange(n)
    if n > cfg.max_points:
        keep = np.unique(np.round(np.linspace(0, n - 1, cfg.max_points)).astype(int))
        traj = traj[:, keep, :]
        valid_mask = valid_mask[:, keep]
        n = len(keep)
    if n < 2:
        return [[int(keep[0])]] if cfg.min_group_size <= 1 else []

    # invalid positions may hold garbage; zero them so pdist stays finite
    safe = np.where(valid_mask[:, :, None], traj, 0.0)

    cum = np.zeros(n * (n - 1) // 2, dtype=np.float64)
    prev = pdist(safe[0])
    for t in range(1, t_total):
        cur = pdist(safe[t])
        diff = np.abs(cur - prev)
        change = np.where(diff > cfg.smooth_factor, diff, 0.0)
        ok = _condensed_valid_pairs(valid_mask[t], valid_mask[t - 1], n)
        cum += np.where(ok, change, 0.0)
        prev = cur

    linkage_matrix = linkage(cum, method="average")
    labels = fcluster(linkage_matrix, cfg.thr, criterion="distance")

    groups: list[list[int]] = []
    for label in range(1, labels.max() + 1):
        members = np.nonzero(labels == label)[0]
        if len(members) >= cfg.min_group_size:
            groups.append([int(keep[m]) for m in members])
    groups.sort(key=lambda g: g[0])
    return groups


def segment_sequence(seq, cfg: SegmentationConfig = SegmentationConfig()) -> list[list[int]]:
    """Convenience wrapper over :func:`segment` for a TrackedSequence."""
    return segment(seq.trajectories, cfg, valid_mask=seq.valid_mask)


def pairwise_distance_matrix(points: np.ndarray) -> np.ndarray:
    """Square pairwise distance matrix (mostly for tests and inspection)."""
    return squareform(pdist(np.asarray(points, dtype=np.float64)))
