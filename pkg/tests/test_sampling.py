from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spatialqa.geometry import is_visible
from spatialqa.sampling import (
    InsufficientTrackError,
    PairCandidate,
    SamplerConfig,
    enumerate_pair_candidates,
    load_visibility_cache,
    overlap_ratio,
    sample_dynamic_pairs,
    sample_pairs_balanced,
    save_visibility_cache,
    visible_point_set,
)
from spatialqa.scene import ScenePointCloud, TrackedSequence

from conftest import simple_frame


def make_candidates(overlaps_pct, tag="p"):
    return [
        PairCandidate(frame_i=f"{tag}{k}a", frame_j=f"{tag}{k}b", overlap=o / 100.0)
        for k, o in enumerate(overlaps_pct)
    ]


class TestVisiblePointSet:
    def test_empty_cloud(self):
        cloud = ScenePointCloud(
            point_ids=np.array([], dtype=np.uint64),
            positions=np.zeros((0, 3)),
            instance_ids=np.array([], dtype=np.int32),
        )
        assert visible_point_set(simple_frame(), cloud) == set()

    def test_all_in_front_unoccluded(self):
        pts = np.array([[0.0, 0.0, 1.0], [0.1, 0.1, 1.5], [-0.2, 0.05, 1.0]])
        cloud = ScenePointCloud(
            point_ids=np.arange(3, dtype=np.uint64),
            positions=pts,
            instance_ids=np.full(3, -1, dtype=np.int32),
        )
        assert visible_point_set(simple_frame(depth_value=3.0), cloud) == {0, 1, 2}

    def test_matches_per_point_sweep_on_fixture(self, static_fixture):
        bundle, _, _ = static_fixture
        cloud = bundle.cloud
        for frame in bundle.frames[:4]:
            brute = {
                int(pid)
                for pid, pos in zip(cloud.point_ids, cloud.positions)
                if is_visible(frame, pos)
            }
            assert visible_point_set(frame, cloud) == brute


class TestOverlapRatio:
    def test_identical(self):
        assert overlap_ratio({1, 2, 3}, {1, 2, 3}) == 1.0

    def test_disjoint(self):
        assert overlap_ratio({1, 2}, {3, 4}) == 0.0

    def test_partial(self):
        p = set(range(10))
        q = set(range(5, 15))
        assert overlap_ratio(p, q) == pytest.approx(5 / 15)

    def test_both_empty_is_zero(self):
        assert overlap_ratio(set(), set()) == 0.0

    @given(st.sets(st.integers(0, 50)), st.sets(st.integers(0, 50)))
    def test_symmetric_and_bounded(self, a, b):
        r = overlap_ratio(a, b)
        assert r == overlap_ratio(b, a)
        assert 0.0 <= r <= 1.0


class TestBalancedSampling:
    def test_listing_trace_two_bins(self):
        # bins of size 3 and 100, quota 10: small bin drained (3), leftover
        # pushes the big bin to 7
        cands = make_candidates([6.5] * 3 + [20.5] * 100)
        out = sample_pairs_balanced(cands, SamplerConfig(quota=10, seed=0))
        assert len(out) == 10
        small = [c for c in out if c.overlap == 0.065]
        large = [c for c in out if c.overlap == 0.205]
        assert len(small) == 3 and len(large) == 7

    def test_quota_zero(self):
        cands = make_candidates([10.0] * 5)
        assert sample_pairs_balanced(cands, SamplerConfig(quota=0, seed=0)) == []

    def test_exhaustive_single_bin(self):
        cands = make_candidates([12.3] * 50)
        out = sample_pairs_balanced(cands, SamplerConfig(quota=50, seed=1))
        assert len(out) == 50
        assert {(c.frame_i, c.frame_j) for c in out} == {
            (c.frame_i, c.frame_j) for c in cands
        }

    def test_out_of_range_never_returned(self):
        cands = make_candidates([2.0, 5.9, 6.0, 20.0, 35.0, 35.1, 80.0])
        out = sample_pairs_balanced(cands, SamplerConfig(quota=10, seed=2))
        assert all(0.06 <= c.overlap <= 0.35 for c in out)

    def test_zero_overlap_quota(self):
        cands = make_candidates([0.0] * 8 + [10.0] * 4)
        cfg = SamplerConfig(quota=2, non_overlap_quota=3, seed=3)
        out = sample_pairs_balanced(cands, cfg)
        zeros = [c for c in out if c.overlap == 0.0]
        assert len(zeros) == 3
        assert len(out) == 5

    def test_determinism(self):
        rng = np.random.default_rng(4)
        cands = make_candidates(rng.uniform(0, 40, size=300))
        cfg = SamplerConfig(quota=37, non_overlap_quota=2, seed=99)
        first = sample_pairs_balanced(cands, cfg)
        second = sample_pairs_balanced(cands, cfg)
        assert [(c.frame_i, c.frame_j) for c in first] == [
            (c.frame_i, c.frame_j) for c in second
        ]

    @pytest.mark.parametrize("trial", range(20))
    def test_quota_conservation_randomized(self, trial):
        rng = np.random.default_rng(1000 + trial)
        n = int(rng.integers(1, 400))
        overlaps = rng.uniform(0, 45, size=n)
        overlaps[rng.random(n) < 0.3] = 0.0
        cands = make_candidates(overlaps)
        quota = int(rng.integers(0, 80))
        nzq = int(rng.integers(0, 10))
        cfg = SamplerConfig(quota=quota, non_overlap_quota=nzq, seed=trial)
        out = sample_pairs_balanced(cands, cfg)
        in_range = sum(1 for o in overlaps if 6.0 <= o <= 35.0 and o != 0.0)
        zeros = sum(1 for o in overlaps if o == 0.0)
        expected = (min(quota, in_range) if quota > 0 and in_range else 0) + min(nzq, zeros)
        assert len(out) == expected
        keys = [(c.frame_i, c.frame_j) for c in out]
        assert len(keys) == len(set(keys)), "pair returned twice"


def make_seq(positions, valid=None):
    traj = np.asarray(positions, dtype=np.float64)
    t, n, _ = traj.shape
    frames = [simple_frame(frame_id=f"t{i}") for i in range(t)]
    mask = np.ones((t, n), dtype=bool) if valid is None else np.asarray(valid, bool)
    return TrackedSequence(trajectories=traj, frames=frames, valid_mask=mask)


class TestDynamicPairs:
    def test_two_valid_frames_single_pair(self):
        seq = make_seq(
            np.zeros((4, 1, 3)),
            valid=[[False], [True], [False], [True]],
        )
        out = sample_dynamic_pairs(seq, 0, SamplerConfig(quota=5, seed=0))
        assert out == [(1, 3)]

    def test_insufficient_track(self):
        seq = make_seq(np.zeros((3, 1, 3)), valid=[[False], [True], [False]])
        with pytest.raises(InsufficientTrackError):
            sample_dynamic_pairs(seq, 0, SamplerConfig(quota=5, seed=0))

    def test_constant_velocity_spans_bins(self):
        # distances are 0.055 * gap, so each gap lands mid-bin in its own
        # 0.05-wide bin; with quota >= bin count every occupied bin
        # contributes >= 1
        t = 10
        traj = np.zeros((t, 1, 3))
        traj[:, 0, 0] = np.arange(t) * 0.055
        seq = make_seq(traj)
        out = sample_dynamic_pairs(seq, 0, SamplerConfig(quota=9, seed=1))
        assert len(out) == 9
        gaps = sorted({j - i for i, j in out})
        assert gaps == list(range(1, 10))

    def test_static_point_single_bin(self):
        seq = make_seq(np.zeros((10, 1, 3)))
        out = sample_dynamic_pairs(seq, 0, SamplerConfig(quota=7, seed=2))
        assert len(out) == 7
        out_all = sample_dynamic_pairs(seq, 0, SamplerConfig(quota=500, seed=2))
        assert len(out_all) == 45

    def test_determinism(self):
        rng = np.random.default_rng(5)
        traj = rng.uniform(0, 1, size=(12, 3, 3)).cumsum(axis=0)
        seq = make_seq(traj)
        a = sample_dynamic_pairs(seq, 1, SamplerConfig(quota=11, seed=42))
        b = sample_dynamic_pairs(seq, 1, SamplerConfig(quota=11, seed=42))
        assert a == b


class TestPairEnumeration:
    def test_stride_and_overlap(self, static_fixture):
        bundle, truth, _ = static_fixture
        cands = enumerate_pair_candidates(bundle.frames, bundle.cloud, stride=1)
        n = len(bundle.frames)
        assert len(cands) == n * (n - 1) // 2
        by_key = {(c.frame_i, c.frame_j): c for c in cands}
        for (a, b), info in truth.pairs.items():
            if (a, b) in by_key:
                assert by_key[(a, b)].overlap == pytest.approx(info["overlap"], abs=1e-12)

    def test_cache_roundtrip(self, static_fixture, tmp_path):
        bundle, _, _ = static_fixture
        frames = bundle.frames[:6]
        vis = {f.frame_id: visible_point_set(f, bundle.cloud) for f in frames}
        cands = enumerate_pair_candidates(frames, bundle.cloud, stride=1, visibility=vis)
        path = tmp_path / "cache.bin"
        save_visibility_cache(path, 1, vis, cands)
        loaded = load_visibility_cache(path, 1)
        assert loaded is not None
        vis2, cands2 = loaded
        assert vis2 == vis
        assert [(c.frame_i, c.frame_j, c.overlap) for c in cands2] == [
            (c.frame_i, c.frame_j, c.overlap) for c in cands
        ]
        assert all(a.co_visible == b.co_visible for a, b in zip(cands, cands2))
        # wrong stride invalidates
        assert load_visibility_cache(path, 2) is None
