from __future__ import annotations

import numpy as np
import pytest

from spatialqa.evaluate import (
    EvalRecord,
    aggregate,
    denormalize_coordinate,
    extract_answer,
    render_table,
    score,
)
from spatialqa.subtasks import (
    COORDINATE_PAIR,
    LABEL,
    MCQ_LETTER,
    SCALAR_DEG,
    SCALAR_MM,
    VECTOR_3,
)


class TestExtraction:
    def test_backtick_scalar(self):
        assert extract_answer("The depth of the annotated point is `1234` mm.", SCALAR_MM) == 1234

    def test_mcq_fallback_letter(self):
        assert extract_answer("I think it is B.", MCQ_LETTER) == "B"

    def test_no_parse_is_failure(self):
        assert extract_answer("no idea", SCALAR_MM) is None

    def test_last_backtick_wins(self):
        assert extract_answer("first `10` then `20` mm", SCALAR_MM) == 20

    def test_backtick_vector_flexible_spacing(self):
        assert extract_answer("vec `[100,-20 ,  3]`", VECTOR_3) == [100.0, -20.0, 3.0]

    def test_coordinate_fallback(self):
        assert extract_answer("it moved to [ 512 , 348 ] roughly", COORDINATE_PAIR) == [512.0, 348.0]

    def test_signed_and_decimal_numbers(self):
        assert extract_answer("delta is `-42.5` degrees", SCALAR_DEG) == -42.5

    def test_label_vocabulary_fallback(self):
        assert extract_answer("The camera went to the left side", LABEL, labels=("left", "right")) == "left"

    def test_label_case_insensitive_backtick(self):
        assert extract_answer("answer: `LEFT`", LABEL, labels=("left", "right")) == "left"

    def test_unparseable_backtick_falls_back(self):
        assert extract_answer("`unsure` but probably 88 mm", SCALAR_MM) == 88.0

    def test_empty_response(self):
        assert extract_answer("", MCQ_LETTER) is None

    def test_total_and_deterministic(self):
        for text in ["", "x", "`[1,2]`", "`A`", "42", "[1,2,3]"]:
            for kind in (SCALAR_MM, COORDINATE_PAIR, VECTOR_3, MCQ_LETTER):
                assert extract_answer(text, kind) == extract_answer(text, kind)


class TestScore:
    def test_scalar_20_percent_boundary(self):
        assert score(1199, 1000, SCALAR_MM)
        assert not score(1201, 1000, SCALAR_MM)
        assert score(1200, 1000, SCALAR_MM)  # inclusive boundary

    def test_zero_ground_truth_needs_exact(self):
        assert score(0, 0, SCALAR_MM)
        assert not score(1, 0, SCALAR_MM)

    def test_vector_l2(self):
        assert score([90, 10, 0], [100, 0, 0], VECTOR_3)  # sqrt(200) < 20
        assert not score([75, 0, 0], [100, 0, 0], VECTOR_3)

    def test_vector_zero_gt(self):
        assert score([0, 0, 0], [0, 0, 0], VECTOR_3)
        assert not score([1, 0, 0], [0, 0, 0], VECTOR_3)

    def test_coordinate_boundary_pixels(self):
        # tolerance 0.05 * 640 = 32 px; sqrt(20^2 + 25^2) = 32.02 just misses
        assert not score((120.0, 125.0), (100.0, 100.0), COORDINATE_PAIR, image_width=640)
        assert score((120.0, 124.0), (100.0, 100.0), COORDINATE_PAIR, image_width=640)

    def test_coordinate_reflection_symmetry(self):
        rng = np.random.default_rng(0)
        w = 640
        for _ in range(50):
            gt = rng.uniform(0, w, 2)
            pred = gt + rng.normal(0, 20, 2)
            direct = score(tuple(pred), tuple(gt), COORDINATE_PAIR, image_width=w)
            mirrored = score(
                (w - pred[0], pred[1]), (w - gt[0], gt[1]), COORDINATE_PAIR, image_width=w
            )
            assert direct == mirrored

    def test_label_case_insensitive(self):
        assert score("Left", "left", LABEL)
        assert not score("right", "left", LABEL)
        assert score("b", "B", MCQ_LETTER)

    def test_failure_is_incorrect(self):
        assert not score(None, 100, SCALAR_MM)

    def test_denormalize(self):
        assert denormalize_coordinate([500, 500], 640, 480) == (320.0, 240.0)


def rec(subtask, correct, sid="s"):
    return EvalRecord(
        sample_id=sid, subtask=subtask, kind=SCALAR_MM, prediction=1,
        ground_truth=1, correct=correct,
    )


class TestAggregate:
    def test_single_subtask_accuracy(self):
        records = [rec("depth_value_dot", c) for c in (True, True, True, False)]
        report = aggregate(records)
        assert report.per_subtask["depth_value_dot"]["accuracy_pct"] == 75.0

    def test_unweighted_mean(self):
        records = [rec("depth_value_dot", True)] * 3 + [rec("correspondence_mcq", False)]
        report = aggregate(records)
        assert report.overall_mean_pct == 50.0
        assert report.pooled_pct == 75.0

    def test_unknown_subtask_rejected(self):
        with pytest.raises(ValueError, match="mystery_task"):
            aggregate([rec("mystery_task", True)])

    def test_empty_report(self):
        report = aggregate([])
        assert report.n_records == 0
        assert report.overall_mean_pct is None
        assert "no records" in render_table(report)

    def test_table_renders(self):
        report = aggregate([rec("depth_value_dot", True)])
        table = render_table(report)
        assert "depth_value_dot" in table and "100.00" in table
