#!/usr/bin/env python3
"""Regenerate the frontend test fixtures from the primary engine.

Produces, under frontend/tests/fixtures/:
  corpus_small/            a tiny but complete corpus (with images) for the
                           loader tests
  differential/
    benchmark.jsonl        >= 1000 eval records across all subtasks
    responses.jsonl        deterministic mixed-quality responses
    report.json            the primary evaluator's verdicts for the pair

Requires the spatialqa package (pip install -e ../..).
"""

from __future__ import annotations

import json
import shutil
import sys
import tempfile
from pathlib import Path

import numpy as np

from spatialqa.config import EngineConfig
from spatialqa.corpus import emit_corpus
from spatialqa.evaluate import evaluate_files
from spatialqa.fixtures import (
    DynamicFixtureSpec,
    StaticFixtureSpec,
    make_dynamic_fixture,
    make_static_fixture,
)

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def build_bundles(base: Path) -> list[str]:
    roots = []
    for sid, seed in (("rooma", 3), ("roomb", 4)):
        root = base / sid
        make_static_fixture(
            StaticFixtureSpec(scene_id=sid, num_frames=28, lattice_spacing=0.25, seed=seed),
            out_root=root,
        )
        roots.append(str(root))
    for sid, source, seed in (
        ("dyna", "ego", 21), ("dynb", "studio", 22),
        ("dync", "ego", 23), ("dynd", "studio", 24),
    ):
        root = base / sid
        make_dynamic_fixture(DynamicFixtureSpec(scene_id=sid, source=source, seed=seed), root)
        roots.append(str(root))
    return roots


def craft_response(row: dict, index: int, rng: np.random.Generator) -> str | None:
    """Deterministic response mix: exact, fallback-shaped, within/outside
    tolerance, garbage, missing, inclusive-boundary, decimal."""
    kind = row["ground_truth"]["kind"]
    value = row["ground_truth"]["value"]
    mode = index % 8

    if mode == 0:
        return row["answer"]
    if mode == 1:  # no backticks: exercises the fallback extractor
        if kind in ("coordinate-pair", "vector-3"):
            inner = " , ".join(str(c) for c in value)
            return f"I would say it ends up around [ {inner} ] after looking closely."
        return f"My best reading of it is {value}."
    if mode == 2:  # inside the 20% tolerance band
        if kind in ("scalar-mm", "scalar-deg"):
            return f"It is roughly `{value * 1.15}` by my estimate."
        if kind == "vector-3":
            bump = [value[0] * 1.1, value[1] * 1.1, value[2] * 1.1]
            return f"Approximately `[ {bump[0]} , {bump[1]} , {bump[2]} ]`."
        if kind == "coordinate-pair":
            return f"Close to `[ {value[0] + 9} , {value[1] + 5} ]` I think."
        return f"The answer is `{value}`."
    if mode == 3:  # clearly outside tolerance / wrong label
        if kind in ("scalar-mm", "scalar-deg"):
            return f"Maybe `{value * 1.7 + 40}`?"
        if kind == "vector-3":
            return f"`[ {value[0] + 900} , {value[1] - 700} , {value[2] + 500} ]`"
        if kind == "coordinate-pair":
            return f"`[ {min(value[0] + 400, 999)} , {min(value[1] + 400, 999)} ]`"
        if kind == "mcq-letter":
            wrong = "ABCD"[("ABCD".index(value) + 1) % 4]
            return f"I pick `{wrong}`."
        flips = {
            "left": "right", "right": "left", "up": "down", "down": "up",
            "forward": "backward", "backward": "forward", "A": "B", "B": "A",
        }
        return f"Definitely `{flips.get(value, 'left')}`."
    if mode == 4:
        return "I cannot tell from these images."
    if mode == 5:
        return None  # absent from the responses file entirely
    if mode == 6:  # inclusive scalar boundary: |p - g| == 0.2 |g| passes
        if kind in ("scalar-mm", "scalar-deg"):
            return f"`{value * 1.2}`"
        if kind == "mcq-letter" or kind == "label":
            return f"the answer is {value}"  # fallback with vocab
        if kind == "vector-3":
            return f"`[ {value[0]} , {value[1]} , {value[2]} ]`"
        return f"`[ {value[0]} , {value[1]} ]`"
    # mode 7: noisy text with a decimal in-tolerance number, plus distractor
    if kind in ("scalar-mm", "scalar-deg"):
        return f"First guess 9999, revised to `{value * 0.85 + 0.5}` on reflection."
    if kind == "vector-3":
        return f"ignore [ 1 , 2 ] -> final `[ {value[0] + 1} , {value[1] - 1} , {value[2]} ]`"
    if kind == "coordinate-pair":
        return f"[ 0 , 0 ] no wait `[ {value[0] - 7} , {value[1] + 6} ]`"
    return f"`{value}`" if kind != "label" else f"{value} (not the opposite)"


def main() -> int:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        base = Path(tmp)
        roots = build_bundles(base / "bundles")

        # --- small loadable corpus (with images)
        small_out = FIXTURES / "corpus_small"
        shutil.rmtree(small_out, ignore_errors=True)
        emit_corpus(
            EngineConfig(
                bundles=roots,
                out_root=str(small_out),
                global_seed=31,
                frame_stride=1,
                train_per_subtask=2,
                eval_per_subtask=1,
                holdout_scenes=["roomb", "dync", "dynd"],
            )
        )

        # --- differential fixture (>= 1000 records, no images needed)
        diff_out = base / "diff_corpus"
        emit_corpus(
            EngineConfig(
                bundles=roots,
                out_root=str(diff_out),
                global_seed=47,
                frame_stride=1,
                train_per_subtask=1,
                eval_per_subtask=40,
                holdout_scenes=["roomb", "dync", "dynd"],
            )
        )
        diff_dir = FIXTURES / "differential"
        shutil.rmtree(diff_dir, ignore_errors=True)
        diff_dir.mkdir(parents=True)
        shutil.copyfile(diff_out / "eval.jsonl", diff_dir / "benchmark.jsonl")

        rows = [
            json.loads(line)
            for line in (diff_dir / "benchmark.jsonl").read_text().splitlines()
            if line.strip()
        ]
        if len(rows) < 1000:
            raise SystemExit(f"differential fixture too small: {len(rows)} records")
        rng = np.random.default_rng(999)
        with open(diff_dir / "responses.jsonl", "w", encoding="utf-8") as fh:
            for i, row in enumerate(rows):
                text = craft_response(row, i, rng)
                if text is not None:
                    fh.write(json.dumps({"sample_id": row["sample_id"], "response": text}) + "\n")
            # an id the benchmark does not know must be ignored by scorers
            fh.write(json.dumps({"sample_id": "not-a-real-sample", "response": "`1`"}) + "\n")

        report = evaluate_files(diff_dir / "benchmark.jsonl", diff_dir / "responses.jsonl")
        (diff_dir / "report.json").write_text(
            json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        print(
            f"fixtures written: {len(rows)} differential records, "
            f"mean accuracy {report.overall_mean_pct:.2f}%"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
