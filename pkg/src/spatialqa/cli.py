"""Command-line entry points: generate, evaluate, stats, validate.

Progress and telemetry go to stderr; data lands in files (or stdout for
read-only reports).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .bundle_io import load_bundle
from .config import EngineConfig
from .corpus import emit_corpus
from .evaluate import evaluate_files, render_table
from .scene import validate_scene

log = logging.getLogger("spatialqa")


def _cmd_generate(args) -> int:
    cfg = EngineConfig.from_file(args.config) if args.config else EngineConfig()
    cfg = cfg.with_overrides(
        out_root=args.out,
        global_seed=args.seed,
        bundles=list(args.bundles) if args.bundles else None,
        train_per_subtask=args.train_quota,
        eval_per_subtask=args.eval_quota,
        holdout_scenes=list(args.holdout) if args.holdout else None,
    )
    cfg = cfg.with_overrides(workers=cfg.effective_workers(args.workers))
    if not cfg.bundles:
        log.error("no bundle roots configured (use --bundles or the config file)")
        return 2
    manifest = emit_corpus(cfg)
    for split in ("train", "eval"):
        total = sum(manifest["counts"][split].values())
        log.info("%s: %d samples over %d subtasks", split, total, len(manifest["counts"][split]))
    for split, missing in manifest["shortfalls"].items():
        for subtask, n in missing.items():
            log.warning("shortfall: %s/%s missing %d samples", split, subtask, n)
    if manifest["scene_errors"]:
        for scene, err in manifest["scene_errors"].items():
            log.error("scene %s failed: %s", scene, err)
        return 1
    return 0


def _cmd_evaluate(args) -> int:
    report = evaluate_files(args.benchmark, args.responses)
    doc = report.to_json()
    if args.report:
        Path(args.report).parent.mkdir(parents=True, exist_ok=True)
        Path(args.report).write_text(
            json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    sys.stdout.write(render_table(report))
    return 0


def _histogram_text(values, n_bins=12, width=40) -> list[str]:
    values = np.asarray(values, dtype=np.float64)
    if not len(values):
        return ["  (empty)"]
    hist, edges = np.histogram(values, bins=n_bins)
    peak = max(int(hist.max()), 1)
    lines = []
    for count, lo, hi in zip(hist, edges[:-1], edges[1:]):
        bar = "#" * max(1 if count else 0, round(count / peak * width))
        lines.append(f"  [{lo:10.2f}, {hi:10.2f})  {count:6d} {bar}")
    return lines


def _cmd_stats(args) -> int:
    root = Path(args.corpus)
    manifest_path = root / "manifest.json"
    if not manifest_path.is_file():
        log.error("no manifest.json under %s", root)
        return 2
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    out = []
    bad_lines = []
    for split, rel in manifest["files"].items():
        path = root / rel
        if not path.is_file():
            continue
        counts: dict[str, int] = {}
        overlaps = []
        magnitudes: dict[str, list[float]] = {}
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    row = json.loads(line)
                except json.JSONDecodeError as exc:
                    bad_lines.append(f"{rel}:{line_no}: {exc}")
                    continue
                counts[row["subtask"]] = counts.get(row["subtask"], 0) + 1
                if "overlap" in row.get("meta", {}):
                    overlaps.append(float(row["meta"]["overlap"]) * 100.0)
                gt = row["ground_truth"]
                if gt["kind"] in ("scalar-mm", "scalar-deg"):
                    magnitudes.setdefault(gt["kind"], []).append(abs(float(gt["value"])))
                elif gt["kind"] == "vector-3":
                    magnitudes.setdefault(gt["kind"], []).append(
                        float(np.linalg.norm(gt["value"]))
                    )
        out.append(f"== {split} ==")
        for subtask in sorted(counts):
            out.append(f"  {subtask:45s} {counts[subtask]:7d}")
        if overlaps:
            out.append(f"  overlap ratio histogram (%), n={len(overlaps)}:")
            out.extend(_histogram_text(overlaps))
        for kind, vals in sorted(magnitudes.items()):
            out.append(f"  |answer| histogram ({kind}), n={len(vals)}:")
            out.extend(_histogram_text(vals))
    for err in bad_lines:
        log.error("corrupt line: %s", err)
    sys.stdout.write("\n".join(out) + "\n")
    return 1 if bad_lines else 0


def _cmd_validate(args) -> int:
    worst = 0
    for root in args.bundle:
        try:
            bundle = load_bundle(Path(root))
        except Exception as exc:
            sys.stdout.write(f"{root}: unreadable: {exc}\n")
            worst = 2
            continue
        violations = validate_scene(bundle)
        if violations:
            worst = max(worst, 1)
            sys.stdout.write(f"{root}: {len(violations)} violation(s)\n")
            for v in violations:
                sys.stdout.write(f"  {v}\n")
        else:
            sys.stdout.write(f"{root}: ok ({len(bundle.frames)} frames)\n")
    return worst


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spatialqa",
        description="Generate and score multi-frame spatial QA corpora from scene bundles.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="emit a train/eval corpus from bundles")
    gen.add_argument("--config", help="JSON config file")
    gen.add_argument("--bundles", nargs="*", help="bundle roots (override config)")
    gen.add_argument("--out", help="output root")
    gen.add_argument("--seed", type=int, help="global seed")
    gen.add_argument("--workers", type=int, help="scene-level workers")
    gen.add_argument("--train-quota", type=int, help="train samples per subtask")
    gen.add_argument("--eval-quota", type=int, help="eval samples per subtask")
    gen.add_argument("--holdout", nargs="*", help="holdout scene ids")
    gen.set_defaults(func=_cmd_generate)

    ev = sub.add_parser("evaluate", help="score model responses against a benchmark")
    ev.add_argument("--benchmark", required=True, help="benchmark JSONL")
    ev.add_argument("--responses", required=True, help="responses JSONL keyed by sample_id")
    ev.add_argument("--report", help="write the JSON report here")
    ev.set_defaults(func=_cmd_evaluate)

    st = sub.add_parser("stats", help="distribution report for an emitted corpus")
    st.add_argument("--corpus", required=True, help="corpus root (with manifest.json)")
    st.set_defaults(func=_cmd_stats)

    va = sub.add_parser("validate", help="check bundles against the scene invariants")
    va.add_argument("--bundle", nargs="+", required=True, help="bundle roots")
    va.set_defaults(func=_cmd_validate)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(name)s: %(message)s"
    )
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
