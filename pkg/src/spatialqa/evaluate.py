"""Answer extraction from free-form responses and tolerance scoring.

Extraction first tries the last backtick-delimited region of the response;
if that fails to parse for the expected kind it falls back to the last
kind-shaped literal anywhere in the text. Scoring: exact (case-insensitive)
match for labels and choice letters, 20% relative L2 error for scalars and
vectors, and a 5%-of-image-width pixel radius for coordinates.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

import numpy as np

from .subtasks import (
    ALL_SUBTASKS,
    COORDINATE_PAIR,
    LABEL,
    MCQ_LETTER,
    SCALAR_DEG,
    SCALAR_MM,
    VECTOR_3,
    subtask_info,
)

_NUM = r"[-+]?\d+(?:\.\d+)?"
_NUM_RE = re.compile(_NUM)
_PAIR_RE = re.compile(rf"\[\s*({_NUM})\s*,\s*({_NUM})\s*\]")
_TRIPLE_RE = re.compile(rf"\[\s*({_NUM})\s*,\s*({_NUM})\s*,\s*({_NUM})\s*\]")
_LETTER_RE = re.compile(r"\b([A-Da-d])\b")
_BACKTICK_RE = re.compile(r"`([^`]*)`")


@dataclass(frozen=True)
class EvalRecord:
    sample_id: str
    subtask: str
    kind: str
    prediction: object | None  # None = extraction failure
    ground_truth: object
    correct: bool


@dataclass
class Report:
    per_subtask: dict[str, dict] = field(default_factory=dict)
    overall_mean_pct: float | None = None
    pooled_pct: float | None = None
    n_records: int = 0
    records: list[EvalRecord] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "n_records": self.n_records,
            "overall_mean_pct": self.overall_mean_pct,
            "pooled_pct": self.pooled_pct,
            "per_subtask": self.per_subtask,
            "records": [
                {
                    "sample_id": r.sample_id,
                    "subtask": r.subtask,
                    "kind": r.kind,
                    "prediction": r.prediction,
                    "ground_truth": r.ground_truth,
                    "correct": r.correct,
                }
                for r in self.records
            ],
        }


def _parse_scalar(text: str) -> float | None:
    m = _NUM_RE.fullmatch(text.strip())
    return float(m.group(0)) if m else None


def _parse_kind(text: str, kind: str, labels: tuple[str, ...] | None):
    """Parse one candidate region strictly; None when it is not kind-shaped."""
    text = text.strip()
    if kind in (SCALAR_MM, SCALAR_DEG):
        return _parse_scalar(text)
    if kind == COORDINATE_PAIR:
        m = _PAIR_RE.fullmatch(text)
        return [float(m.group(1)), float(m.group(2))] if m else None
    if kind == VECTOR_3:
        m = _TRIPLE_RE.fullmatch(text)
        return [float(m.group(i)) for i in (1, 2, 3)] if m else None
    if kind == MCQ_LETTER:
        m = _LETTER_RE.fullmatch(text)
        return m.group(1).upper() if m else None
    if kind == LABEL:
        if labels:
            lowered = text.lower()
            for cand in labels:
                if lowered == cand.lower():
                    return cand
            return None
        return text if text else None
    raise ValueError(f"unknown answer kind {kind!r}")


def _fallback_search(response: str, kind: str, labels: tuple[str, ...] | None):
    """Last kind-shaped literal anywhere in the text."""
    if kind in (SCALAR_MM, SCALAR_DEG):
        hits = _NUM_RE.findall(response)
        return float(hits[-1]) if hits else None
    if kind == COORDINATE_PAIR:
        hits = _PAIR_RE.findall(response)
        return [float(hits[-1][0]), float(hits[-1][1])] if hits else None
    if kind == VECTOR_3:
        hits = _TRIPLE_RE.findall(response)
        return [float(x) for x in hits[-1]] if hits else None
    if kind == MCQ_LETTER:
        hits = _LETTER_RE.findall(response)
        return hits[-1].upper() if hits else None
    if kind == LABEL:
        if not labels:
            return None
        best = None
        best_pos = -1
        for cand in labels:
            for m in re.finditer(rf"\b{re.escape(cand)}\b", response, re.IGNORECASE):
                if m.start() > best_pos:
                    best_pos = m.start()
                    best = cand
        return best
    raise ValueError(f"unknown answer kind {kind!r}")


def extract_answer(response: str, kind: str, labels: tuple[str, ...] | None = None):
    """Pull a kind-shaped prediction out of a free-form response.

    Returns the parsed value, or None when nothing answer-shaped exists.
    Deterministic and total.
    """
    if not response:
        return None
    regions = _BACKTICK_RE.findall(response)
    if regions:
        parsed = _parse_kind(regions[-1], kind, labels)
        if parsed is not None:
            return parsed
    return _fallback_search(response, kind, labels)


def denormalize_coordinate(pair, width: int, height: int) -> tuple[float, float]:
    """Map 0-1000 normalized coordinates back to pixels."""
    return float(pair[0]) / 1000.0 * width, float(pair[1]) / 1000.0 * height


def score(pred, gt, kind: str, image_width: int | None = None) -> bool:
    """Correctness of a parsed prediction against the ground truth.

    Scalars and vectors pass when the L2 error is within 20% of the ground
    truth's L2 norm (a zero ground truth therefore demands an exact zero).
    Coordinate pairs are compared in pixel space against 5% of the image
    width. Labels and letters match exactly, ignoring case.
    """
    if pred is None:
        return False
    if kind in (LABEL, MCQ_LETTER):
        return str(pred).strip().lower() == str(gt).strip().lower()
    if kind in (SCALAR_MM, SCALAR_DEG):
        return abs(float(pred) - float(gt)) <= 0.2 * abs(float(gt))
    if kind == VECTOR_3:
        p = np.asarray(pred, dtype=np.float64)
        g = np.asarray(gt, dtype=np.float64)
        if p.shape != (3,) or g.shape != (3,):
            return False
        return float(np.linalg.norm(p - g)) <= 0.2 * float(np.linalg.norm(g))
    if kind == COORDINATE_PAIR:
        if image_width is None:
            raise ValueError("coordinate scoring needs the answer image's width")
        p = np.asarray(pred, dtype=np.float64)
        g = np.asarray(gt, dtype=np.float64)
        if p.shape != (2,) or g.shape != (2,):
            return False
        return float(np.linalg.norm(p - g)) <= 0.05 * image_width
    raise ValueError(f"unknown answer kind {kind!r}")


def score_sample(sample: dict, response: str | None) -> EvalRecord:
    """Extract + score one benchmark sample against a raw response string."""
    info = subtask_info(sample["subtask"])
    kind = info.answer_kind
    gt = sample["ground_truth"]["value"]
    pred = extract_answer(response or "", kind, labels=info.labels or None)
    if kind == COORDINATE_PAIR:
        width = int(sample["meta"]["image_width"])
        height = int(sample["meta"]["image_height"])
        correct = pred is not None and score(
            denormalize_coordinate(pred, width, height),
            denormalize_coordinate(gt, width, height),
            kind,
            image_width=width,
        )
    else:
        correct = score(pred, gt, kind)
    return EvalRecord(
        sample_id=sample["sample_id"],
        subtask=sample["subtask"],
        kind=kind,
        prediction=pred,
        ground_truth=gt,
        correct=bool(correct),
    )


def aggregate(records: list[EvalRecord], keep_records: bool = True) -> Report:
    """Per-subtask accuracy plus the unweighted subtask mean.

    Unknown subtask ids are rejected (they indicate a schema mismatch, not a
    wrong answer). An empty record list yields an explicitly empty report.
    """
    unknown = sorted({r.subtask for r in records} - set(ALL_SUBTASKS))
    if unknown:
        raise ValueError(f"records carry unknown subtask ids: {unknown}")
    report = Report(n_records=len(records), records=records if keep_records else [])
    if not records:
        return report
    by_subtask: dict[str, list[EvalRecord]] = {}
    for r in records:
        by_subtask.setdefault(r.subtask, []).append(r)
    accs = []
    for subtask in sorted(by_subtask):
        group = by_subtask[subtask]
        n_correct = sum(r.correct for r in group)
        acc = 100.0 * n_correct / len(group)
        report.per_subtask[subtask] = {
            "total": len(group),
            "correct": n_correct,
            "accuracy_pct": acc,
        }
        accs.append(acc)
    # sequential sum keeps the mean bit-reproducible across implementations
    report.overall_mean_pct = sum(accs) / len(accs)
    report.pooled_pct = 100.0 * sum(r.correct for r in records) / len(records)
    return report


def render_table(report: Report) -> str:
    """Aligned text table for terminals and logs."""
    if not report.per_subtask:
        return "no records\n"
    name_w = max(len(s) for s in report.per_subtask) + 2
    lines = [f"{'subtask'.ljust(name_w)}{'correct':>9}{'total':>8}{'acc %':>9}"]
    for subtask, row in report.per_subtask.items():
        lines.append(
            f"{subtask.ljust(name_w)}{row['correct']:>9}{row['total']:>8}"
            f"{row['accuracy_pct']:>9.2f}"
        )
    lines.append(
        f"{'mean (unweighted)'.ljust(name_w)}{'':>9}{'':>8}{report.overall_mean_pct:>9.2f}"
    )
    return "\n".join(lines) + "\n"


def evaluate_files(benchmark_path, responses_path, keep_records: bool = True) -> Report:
    """Score a responses JSONL (keyed by sample_id) against a benchmark JSONL."""
    responses: dict[str, str] = {}
    with open(responses_path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{responses_path}:{line_no}: bad JSON: {exc}") from None
            responses[doc["sample_id"]] = doc.get("response", "")
    records = []
    with open(benchmark_path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                sample = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{benchmark_path}:{line_no}: bad JSON: {exc}") from None
            records.append(score_sample(sample, responses.get(sample["sample_id"])))
    return aggregate(records, keep_records=keep_records)
