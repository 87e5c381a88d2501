from __future__ import annotations

import itertools

import numpy as np
import pytest

from spatialqa.coverage import (
    CoverageQuery,
    axis_coverage,
    bfs_min_coverage,
    covers_dimension,
    dimension_axis,
)


def brute_force_min_coverage(points, visibility, query):
    """Independent oracle: every subset of size <= max_k, filtered for
    coverage, then for minimality (no proper covering subset)."""
    images = list(visibility.keys())
    covering = []
    for k in range(1, query.max_k + 1):
        for combo in itertools.combinations(images, k):
            mask = np.zeros(len(points), dtype=bool)
            for img in combo:
                mask |= visibility[img]
            cov = axis_coverage(points, mask, query.axis)
            if covers_dimension(cov, query.target_dim, query.tol):
                covering.append(frozenset(combo))
    return {
        s
        for s in covering
        if not any(o < s for o in covering)
    }


class TestAxisCoverage:
    def test_empty_mask(self):
        pts = np.random.default_rng(0).uniform(size=(5, 3))
        assert axis_coverage(pts, np.zeros(5, dtype=bool), "x") == 0.0

    def test_spread(self):
        pts = np.array([[0.0, 0, 0], [4.0, 0, 0], [6.0, 0, 0]])
        assert axis_coverage(pts, np.ones(3, dtype=bool), "x") == 6.0

    def test_single_point(self):
        pts = np.array([[2.0, 1.0, 0.5]])
        assert axis_coverage(pts, np.ones(1, dtype=bool), "z") == 0.0

    def test_monotone_under_mask_growth(self):
        rng = np.random.default_rng(1)
        pts = rng.uniform(size=(40, 3))
        for _ in range(50):
            small = rng.random(40) < 0.3
            grown = small | (rng.random(40) < 0.3)
            for ax in "xyz":
                assert axis_coverage(pts, grown, ax) >= axis_coverage(pts, small, ax)


class TestBfsMinCoverage:
    def test_singleton_suppresses_supersets(self):
        pts = np.array([[float(x), 0, 0] for x in range(11)])
        vis = {
            "full": pts[:, 0] >= 0,  # sees everything
            "half": pts[:, 0] <= 5,
        }
        query = CoverageQuery(axis="x", target_dim=10.0, tol=0.1, max_k=2)
        out = bfs_min_coverage(pts, vis, query)
        assert out == [["full"]]

    def test_two_image_union_required(self):
        pts = np.array([[float(x), 0, 0] for x in range(11)])
        vis = {"a": pts[:, 0] <= 6, "b": pts[:, 0] >= 4}
        query = CoverageQuery(axis="x", target_dim=10.0, tol=0.1, max_k=2)
        out = bfs_min_coverage(pts, vis, query)
        assert out == [["a", "b"]]

    def test_uncoverable_returns_empty(self):
        pts = np.array([[float(x), 0, 0] for x in range(11)])
        vis = {"a": pts[:, 0] <= 2, "b": pts[:, 0] <= 3}
        query = CoverageQuery(axis="x", target_dim=10.0, tol=0.1, max_k=2)
        assert bfs_min_coverage(pts, vis, query) == []

    @pytest.mark.parametrize("trial", range(100))
    def test_matches_brute_force(self, trial):
        rng = np.random.default_rng(20_000 + trial)
        n_pts = int(rng.integers(8, 40))
        n_imgs = int(rng.integers(1, 11))
        pts = rng.uniform(0, 2.0, size=(n_pts, 3))
        vis = {
            f"img{k}": rng.random(n_pts) < rng.uniform(0.1, 0.7)
            for k in range(n_imgs)
        }
        axis = "xyz"[int(rng.integers(3))]
        full = axis_coverage(pts, np.ones(n_pts, dtype=bool), axis)
        target = max(full * float(rng.uniform(0.4, 1.1)), 0.05)
        query = CoverageQuery(
            axis=axis, target_dim=target, tol=0.1, max_k=int(rng.integers(1, 4))
        )
        got = {frozenset(s) for s in bfs_min_coverage(pts, vis, query)}
        expected = brute_force_min_coverage(pts, vis, query)
        assert got == expected

    def test_anti_chain(self):
        rng = np.random.default_rng(9)
        pts = rng.uniform(0, 1, size=(30, 3))
        vis = {f"i{k}": rng.random(30) < 0.4 for k in range(8)}
        query = CoverageQuery(axis="y", target_dim=0.7, tol=0.1, max_k=3)
        sets = [frozenset(s) for s in bfs_min_coverage(pts, vis, query)]
        for a in sets:
            for b in sets:
                assert a == b or not a <= b

    def test_returned_sets_in_scan_order(self):
        pts = np.array([[float(x), 0, 0] for x in range(11)])
        vis = {"z": pts[:, 0] >= 4, "a": pts[:, 0] <= 6}
        query = CoverageQuery(axis="x", target_dim=10.0, tol=0.1, max_k=2)
        out = bfs_min_coverage(pts, vis, query)
        # insertion order of the visibility dict defines scan order
        assert out == [["z", "a"]]


class TestDimensionAxis:
    def test_height_is_gravity(self):
        assert dimension_axis("height", np.array([0.5, 0.8, 2.0])) == "z"

    def test_length_width_split(self):
        extent = np.array([0.5, 0.8, 2.0])
        assert dimension_axis("length", extent) == "y"
        assert dimension_axis("width", extent) == "x"

    def test_unknown_dimension(self):
        with pytest.raises(ValueError):
            dimension_axis("depth", np.ones(3))
