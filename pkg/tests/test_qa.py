from __future__ import annotations

import math

import numpy as np
import pytest

from spatialqa.evaluate import extract_answer
from spatialqa.geometry import project_point
from spatialqa.qa import (
    GenParams,
    SkipSample,
    gen_camera_movement_qa,
    gen_correspondence_qa,
    gen_depth_qa,
    gen_object_movement_qa,
    gen_object_size_qa,
    round_half_away,
    to_mm,
)
from spatialqa.sampling import SamplerConfig, enumerate_pair_candidates
from spatialqa.scene import ObjectAnnotation, ScenePointCloud
from spatialqa.segmentation import segment_sequence
from spatialqa.subtasks import REF_COORD, REF_DOT, subtask_info
from spatialqa.templates import load_template_set

from conftest import simple_frame

TS = load_template_set()


def grid_cloud(depths, span=0.5, n=5):
    """Points on fronto-parallel planes at the given depths."""
    pts = []
    for z in depths:
        xs = np.linspace(-span, span, n)
        ys = np.linspace(-span / 2, span / 2, n)
        for x in xs:
            for y in ys:
                pts.append([x, y, z])
    pts = np.asarray(pts)
    return ScenePointCloud(
        point_ids=np.arange(len(pts), dtype=np.uint64),
        positions=pts,
        instance_ids=np.full(len(pts), -1, dtype=np.int32),
    )


class TestRounding:
    def test_half_away_from_zero(self):
        assert round_half_away(1234.5) == 1235
        assert round_half_away(-1234.5) == -1235
        assert round_half_away(1234.4999) == 1234
        assert to_mm(1.2345) == 1235  # 1234.5 mm rounds up


class TestDepthQA:
    def test_value_mode_answer_roundtrip(self):
        frame = simple_frame(depth_value=5.0)
        cloud = grid_cloud([1.2345])
        rng = np.random.default_rng(0)
        s = gen_depth_qa(frame, cloud, "value", REF_DOT, rng, TS)
        assert s.subtask == "depth_value_dot"
        assert s.ground_truth.value == 1235
        assert "`1235`" in s.answer
        assert extract_answer(s.answer, s.ground_truth.kind) == 1235
        assert 0 in s.overlays and len(s.overlays[0]) == 1

    def test_value_coordinate_mode_has_no_overlays(self):
        frame = simple_frame(depth_value=5.0)
        cloud = grid_cloud([2.0])
        s = gen_depth_qa(frame, cloud, "value", REF_COORD, np.random.default_rng(1), TS)
        assert s.subtask == "depth_value_coord"
        assert s.overlays == {}
        assert "[ " in s.question and " ]" in s.question

    def test_comparison_nearer_label(self):
        frame = simple_frame(depth_value=5.0)
        cloud = grid_cloud([1.0, 2.0])
        for seed in range(6):
            s = gen_depth_qa(frame, cloud, "comparison", REF_DOT, np.random.default_rng(seed), TS)
            nearer, farther = sorted(s.meta["depths_mm"])
            idx = s.meta["depths_mm"].index(nearer)
            assert s.ground_truth.value == "AB"[idx]

    def test_comparison_rejects_ties(self):
        frame = simple_frame(depth_value=5.0)
        cloud = grid_cloud([1.0, 1.005])  # 5 mm apart: all ties
        with pytest.raises(SkipSample):
            gen_depth_qa(frame, cloud, "comparison", REF_DOT, np.random.default_rng(2), TS)

    def test_no_visible_points_skips(self):
        frame = simple_frame(depth_value=0.0)  # all depth invalid
        cloud = grid_cloud([1.0])
        with pytest.raises(SkipSample):
            gen_depth_qa(frame, cloud, "value", REF_DOT, np.random.default_rng(3), TS)


def correspondence_setup(static_fixture):
    bundle, _, _ = static_fixture
    cands = enumerate_pair_candidates(bundle.frames, bundle.cloud, stride=1)
    frames = {f.frame_id: f for f in bundle.frames}
    usable = [c for c in cands if len(c.co_visible) >= 8]
    assert usable
    return bundle, frames, usable


class TestCorrespondenceQA:
    def test_coordinate_answer_matches_projection(self, static_fixture):
        bundle, frames, usable = correspondence_setup(static_fixture)
        pair = usable[0]
        s = gen_correspondence_qa(
            pair, frames[pair.frame_i], frames[pair.frame_j], bundle.cloud,
            "coordinate", np.random.default_rng(0), TS,
        )
        pid = s.meta["point_id"]
        idx = int(np.nonzero(bundle.cloud.point_ids == pid)[0][0])
        u2, v2, _ = project_point(frames[pair.frame_j], bundle.cloud.positions[idx])
        fj = frames[pair.frame_j]
        expected = [math.floor(u2 / fj.width * 1000), math.floor(v2 / fj.height * 1000)]
        assert s.ground_truth.value == expected
        assert extract_answer(s.answer, s.ground_truth.kind) == [float(x) for x in expected]

    def test_mcq_has_four_labeled_dots(self, static_fixture):
        bundle, frames, usable = correspondence_setup(static_fixture)
        pair = usable[0]
        s = gen_correspondence_qa(
            pair, frames[pair.frame_i], frames[pair.frame_j], bundle.cloud,
            "mcq", np.random.default_rng(1), TS,
        )
        assert [d.label for d in s.overlays[1]] == ["A", "B", "C", "D"]
        assert s.overlays[0][0].label is None
        assert s.ground_truth.value in "ABCD"

    def test_mcq_correct_letter_uniform(self, static_fixture):
        bundle, frames, usable = correspondence_setup(static_fixture)
        counts = {letter: 0 for letter in "ABCD"}
        rng = np.random.default_rng(2)
        made = 0
        k = 0
        while made < 400:
            pair = usable[k % len(usable)]
            k += 1
            try:
                s = gen_correspondence_qa(
                    pair, frames[pair.frame_i], frames[pair.frame_j], bundle.cloud,
                    "mcq", rng, TS,
                )
            except SkipSample:
                continue
            counts[s.ground_truth.value] += 1
            made += 1
        for letter, n in counts.items():
            assert 0.25 - 0.07 <= n / made <= 0.25 + 0.07, counts

    def test_hard_distractors_in_annulus(self):
        # dense plane: projected neighbors ~4 px apart, so the hard annulus
        # [10 px, 5% of width = 32 px] always holds candidates
        from spatialqa.sampling import PairCandidate

        frame = simple_frame(depth_value=5.0)
        cloud = grid_cloud([2.0], span=0.6, n=40)
        pair = PairCandidate("f0", "f0", 0.2, frozenset(int(i) for i in cloud.point_ids))
        rng = np.random.default_rng(3)
        params = GenParams()
        for _ in range(10):
            s = gen_correspondence_qa(
                pair, frame, frame, cloud,
                "mcq", rng, TS, difficulty="hard", params=params,
            )
            correct = next(d for d in s.overlays[1] if d.label == s.ground_truth.value)
            for d in s.overlays[1]:
                if d.label == s.ground_truth.value:
                    continue
                dist = math.hypot(d.x - correct.x, d.y - correct.y)
                assert params.min_separation_px <= dist <= params.hard_radius_frac * frame.width + 1e-9

    def test_empty_covisible_skips(self, static_fixture):
        bundle, frames, usable = correspondence_setup(static_fixture)
        from spatialqa.sampling import PairCandidate

        bare = PairCandidate(usable[0].frame_i, usable[0].frame_j, 0.1, frozenset())
        with pytest.raises(SkipSample):
            gen_correspondence_qa(
                bare, frames[bare.frame_i], frames[bare.frame_j], bundle.cloud,
                "coordinate", np.random.default_rng(4), TS,
            )


class TestCameraMovementQA:
    def test_identical_frames_zero_answers(self):
        f = simple_frame(frame_id="a")
        rng = np.random.default_rng(0)
        s = gen_camera_movement_qa(f, f, "translation_distance", rng, TS)
        assert s.ground_truth.value == 0
        s = gen_camera_movement_qa(f, f, "translation_vector", rng, TS)
        assert s.ground_truth.value == [0, 0, 0]
        assert "`[ 0 , 0 , 0 ]`" in s.answer

    def test_pure_right_translation(self):
        fi = simple_frame(np.eye(4), frame_id="a")
        e = np.eye(4)
        e[0, 3] = 1.0  # one metre along camera x (identity pose: world x)
        fj = simple_frame(e, frame_id="b")
        rng = np.random.default_rng(1)
        s = gen_camera_movement_qa(fi, fj, "translation_direction_lateral", rng, TS)
        assert s.ground_truth.value == "right"
        s = gen_camera_movement_qa(fi, fj, "translation_distance", rng, TS)
        assert s.ground_truth.value == 1000

    def test_yaw_rotation_left_and_degree(self):
        from spatialqa.fixtures import camera_pose

        fi = simple_frame(camera_pose((0, 0, 0), 10.0, 0.0), frame_id="a")
        fj = simple_frame(camera_pose((0, 0, 0), 40.0, 0.0), frame_id="b")
        rng = np.random.default_rng(2)
        s = gen_camera_movement_qa(fi, fj, "rotation_direction_yaw", rng, TS)
        assert s.ground_truth.value == "left"
        s = gen_camera_movement_qa(fi, fj, "orientation_degree", rng, TS)
        assert s.ground_truth.value == 30
        s = gen_camera_movement_qa(fi, fj, "rotation_angle", rng, TS)
        assert s.ground_truth.value == 30

    def test_subthreshold_direction_skips(self):
        fi = simple_frame(np.eye(4), frame_id="a")
        e = np.eye(4)
        e[0, 3] = 0.005  # below tau_still
        fj = simple_frame(e, frame_id="b")
        with pytest.raises(SkipSample):
            gen_camera_movement_qa(
                fi, fj, "translation_direction_lateral", np.random.default_rng(3), TS
            )

    def test_degenerate_yaw_skips(self):
        fi = simple_frame(np.eye(4), frame_id="a")  # forward = world +z: degenerate
        fj = simple_frame(np.eye(4), frame_id="b")
        with pytest.raises(SkipSample):
            gen_camera_movement_qa(fi, fj, "orientation_degree", np.random.default_rng(4), TS)


class TestObjectMovementQA:
    def test_distance_and_vector(self, dynamic_fixture):
        bundle, truth, _ = dynamic_fixture
        seq = bundle.tracks
        groups = segment_sequence(seq)
        rng = np.random.default_rng(0)
        s = gen_object_movement_qa(
            seq, groups, "distance", REF_DOT, rng, TS, source=bundle.source,
            sampler=SamplerConfig(quota=16, seed=5),
        )
        assert s.subtask == f"object_movement_distance_dot_{bundle.source}"
        point, ti, tj = s.meta["point_index"], s.meta["t_i"], s.meta["t_j"]
        vec, dist = truth.displacements[(ti, tj, point)]
        assert s.ground_truth.value == to_mm(dist)
        assert 0 in s.overlays

        s = gen_object_movement_qa(
            seq, groups, "vector", REF_COORD, rng, TS, source=bundle.source,
            sampler=SamplerConfig(quota=16, seed=6),
        )
        point, ti, tj = s.meta["point_index"], s.meta["t_i"], s.meta["t_j"]
        vec, _ = truth.displacements[(ti, tj, point)]
        assert s.ground_truth.value == [to_mm(c) for c in vec]
        assert s.overlays == {}

    def test_group_sampling_uniform_over_groups(self, dynamic_fixture):
        bundle, _, _ = dynamic_fixture
        seq = bundle.tracks
        # two artificial groups of very different size
        groups = [list(range(20)), [20, 21]]
        rng = np.random.default_rng(1)
        hits = 0
        n = 300
        for _ in range(n):
            s = gen_object_movement_qa(
                seq, groups, "distance", REF_COORD, rng, TS, source=bundle.source,
                sampler=SamplerConfig(quota=8, seed=7),
            )
            hits += s.meta["point_index"] >= 20
        assert 0.4 <= hits / n <= 0.6

    def test_no_groups_skips(self, dynamic_fixture):
        bundle, _, _ = dynamic_fixture
        with pytest.raises(SkipSample):
            gen_object_movement_qa(
                bundle.tracks, [], "distance", REF_DOT,
                np.random.default_rng(2), TS, source=bundle.source,
            )


class TestObjectSizeQA:
    def test_axis_mapping_and_answer(self):
        obj = ObjectAnnotation(
            instance_id=1, category="crate",
            box_min=np.array([0.0, 0.0, 0.0]), box_max=np.array([0.5, 0.8, 2.0]),
        )
        rng = np.random.default_rng(0)
        s = gen_object_size_qa(obj, [["f1", "f2"]], "height", rng, TS)
        assert s.ground_truth.value == 2000
        assert s.frame_ids == ["f1", "f2"]
        assert s.question.count("<image>") == 2
        s = gen_object_size_qa(obj, [["f1"]], "length", rng, TS)
        assert s.ground_truth.value == 800
        s = gen_object_size_qa(obj, [["f1"]], "width", rng, TS)
        assert s.ground_truth.value == 500

    def test_no_coverage_set_skips(self):
        obj = ObjectAnnotation(1, "crate", np.zeros(3), np.ones(3))
        with pytest.raises(SkipSample):
            gen_object_size_qa(obj, [], "height", np.random.default_rng(1), TS)


class TestAnswerKindConsistency:
    def test_generated_subtasks_register(self, static_fixture):
        bundle, _, _ = static_fixture
        frame = bundle.frames[0]
        cloud = bundle.cloud
        rng = np.random.default_rng(0)
        s = gen_depth_qa(frame, cloud, "value", REF_DOT, rng, TS)
        assert subtask_info(s.subtask).answer_kind == s.ground_truth.kind
