"""Minimum-coverage-set search over per-image object visibility.

Finds the smallest image sets whose jointly visible object points span a
target dimension along one axis. Level-by-level breadth-first expansion with
two prunes: sets that already cover are never expanded (their supersets
cannot be minimal) and sets containing an earlier solution are dropped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

AXIS_INDEX = {"x": 0, "y": 1, "z": 2}


@dataclass(frozen=True)
class CoverageQuery:
    """Target extent along one world axis, with acceptance tolerance."""

    axis: str  # "x", "y", or "z"
    target_dim: float  # metres
    tol: float = 0.1  # fraction of target_dim
    max_k: int = 2  # largest image-set size to consider

    def __post_init__(self) -> None:
        if self.axis not in AXIS_INDEX:
            raise ValueError(f"axis must be one of x/y/z, got {self.axis!r}")
        if self.target_dim <= 0:
            raise ValueError("target_dim must be positive")
        if not (0 < self.tol < 1):
            raise ValueError("tol must be in (0, 1)")
        if self.max_k < 1:
            raise ValueError("max_k must be >= 1")


def axis_coverage(points: np.ndarray, mask: np.ndarray, axis: str | int) -> float:
    """Min-to-max spread of the masked points along an axis (0 if none)."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        return 0.0
    col = AXIS_INDEX[axis] if isinstance(axis, str) else axis
    coords = np.asarray(points, dtype=np.float64)[mask, col]
    return float(coords.max() - coords.min())


def covers_dimension(coverage: float, target_dim: float, tol: float) -> bool:
    return abs(coverage - target_dim) <= tol * target_dim


def bfs_min_coverage(
    object_points: np.ndarray,
    per_image_visibility: dict[str, np.ndarray],
    query: CoverageQuery,
) -> list[list[str]]:
    """Minimal image sets spanning ``query.target_dim`` along ``query.axis``.

    ``per_image_visibility`` maps image id -> boolean mask over
    ``object_points`` rows (visibility already restricted to the object).
    Returned sets form an anti-chain: none is a superset of another, and no
    proper subset of a returned set covers. Empty result means the object is
    not coverable within ``max_k`` images.
    """
    images = list(per_image_visibility.keys())
    pts = np.asarray(object_points, dtype=np.float64)
    upper = (1.0 + query.tol) * query.target_dim

    queue: list[tuple[list[str], np.ndarray, int]] = [
        ([img], np.asarray(per_image_visibility[img], dtype=bool), i)
        for i, img in enumerate(images)
    ]
    solutions: list[list[str]] = []
    solution_sets: list[frozenset[str]] = []

    k = 1
    while k <= query.max_k and queue:
        next_level: list[tuple[list[str], np.ndarray, int]] = []
        for combo, comb_mask, last_idx in queue:
            combo_set = frozenset(combo)
            if any(sol <= combo_set for sol in solution_sets):
                continue
            cov = axis_coverage(pts, comb_mask, query.axis)
            if covers_dimension(cov, query.target_dim, query.tol):
                solutions.append(combo)
                solution_sets.append(combo_set)
            elif k < query.max_k and cov <= upper:
                # over-covered sets only grow further out of tolerance
                for j in range(last_idx + 1, len(images)):
                    mask_j = np.asarray(per_image_visibility[images[j]], dtype=bool)
                    next_level.append((combo + [images[j]], comb_mask | mask_j, j))
        queue = next_level
        k += 1
    return solutions


def dimension_axis(dimension: str, extent: np.ndarray) -> str:
    """Map a named object dimension to a world axis.

    Height is the gravity (z) extent; of the two horizontal extents the
    larger is the length and the smaller the width (ties: x is length).
    """
    if dimension == "height":
        return "z"
    if dimension not in ("length", "width"):
        raise ValueError(f"unknown dimension {dimension!r}")
    ex, ey = float(extent[0]), float(extent[1])
    if dimension == "length":
        return "x" if ex >= ey else "y"
    return "y" if ex >= ey else "x"
