from __future__ import annotations

import json

import pytest

from spatialqa.subtasks import ALL_SUBTASKS, REGISTRY
from spatialqa.templates import TemplateError, load_template_set


def test_default_templates_load_and_cover_registry():
    ts = load_template_set()
    for info in REGISTRY.values():
        entry = ts.for_key(info.template_key)
        assert entry.descriptions and entry.questions and entry.answers


def test_registry_is_26_subtasks():
    assert len(ALL_SUBTASKS) == 26


def test_image_token_counts_match_registry():
    ts = load_template_set()
    for info in REGISTRY.values():
        for desc in ts.for_key(info.template_key).descriptions:
            if info.num_images > 0:
                assert desc.count("<image>") == info.num_images, info.subtask_id
            else:
                assert "{images}" in desc  # variable-count families


def test_unknown_slot_rejected(tmp_path):
    ts_path = tmp_path / "bad.json"
    bad = {
        "version": 1,
        "templates": {
            "depth_value_dot": {
                "descriptions": ["<image>\nd"],
                "questions": ["what is {bogus}?"],
                "answers": ["`{depth}`"],
            }
        },
    }
    ts_path.write_text(json.dumps(bad))
    with pytest.raises(TemplateError, match="bogus"):
        load_template_set(ts_path)


def test_answer_needs_exactly_one_backtick_region(tmp_path):
    ts_path = tmp_path / "bad.json"
    bad = {
        "version": 1,
        "templates": {
            "depth_value_dot": {
                "descriptions": ["<image>\nd"],
                "questions": ["q"],
                "answers": ["no backticks {depth}"],
            }
        },
    }
    ts_path.write_text(json.dumps(bad))
    with pytest.raises(TemplateError, match="backtick"):
        load_template_set(ts_path)


def test_missing_key_rejected(tmp_path):
    ts_path = tmp_path / "bad.json"
    ts_path.write_text(json.dumps({"version": 1, "templates": {}}))
    with pytest.raises(TemplateError, match="lacks keys"):
        load_template_set(ts_path)
