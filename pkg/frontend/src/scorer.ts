/**
 * Independent re-implementation of the benchmark scorer.
 *
 * This deliberately re-states the rules rather than porting the engine's
 * code: the differential test in tests/differential.test.ts checks that
 * both implementations agree field-for-field on real corpora.
 *
 * Rules:
 *  - extraction: last backtick region, parsed strictly for the expected
 *    answer kind; otherwise the last answer-shaped literal anywhere.
 *  - labels / choice letters: exact match, case-insensitive.
 *  - scalars & vectors: L2 error within 20% of the ground truth's norm
 *    (zero ground truth accepts only an exact zero).
 *  - coordinates: pixel distance within 5% of the answer image's width,
 *    after denormalizing the 0-1000 grid with the image's width/height.
 */

import {
  answerKindOf,
  labelVocabularyOf,
  type AnswerKind,
  type CorpusSample,
  type EvalRecord,
  type Report,
} from "./types.js";

const NUM = "[-+]?\\d+(?:\\.\\d+)?";
const NUM_RE = new RegExp(NUM, "g");
const PAIR_RE = new RegExp(`\\[\\s*(${NUM})\\s*,\\s*(${NUM})\\s*\\]`, "g");
const TRIPLE_RE = new RegExp(
  `\\[\\s*(${NUM})\\s*,\\s*(${NUM})\\s*,\\s*(${NUM})\\s*\\]`,
  "g",
);
const LETTER_RE = /\b([A-Da-d])\b/g;
const BACKTICK_RE = /`([^`]*)`/g;

type Extracted = string | number | number[] | null;

function l2(...components: number[]): number {
  let total = 0;
  for (const c of components) total += c * c;
  return Math.sqrt(total);
}

function allMatches(re: RegExp, text: string): RegExpExecArray[] {
  re.lastIndex = 0;
  return [...text.matchAll(re)];
}

function parseRegion(text: string, kind: AnswerKind, labels: string[] | null): Extracted {
  const trimmed = text.trim();
  switch (kind) {
    case "scalar-mm":
    case "scalar-deg": {
      const m = trimmed.match(new RegExp(`^${NUM}$`));
      return m ? parseFloat(trimmed) : null;
    }
    case "coordinate-pair": {
      const m = trimmed.match(new RegExp(`^\\[\\s*(${NUM})\\s*,\\s*(${NUM})\\s*\\]$`));
      return m ? [parseFloat(m[1]), parseFloat(m[2])] : null;
    }
    case "vector-3": {
      const m = trimmed.match(
        new RegExp(`^\\[\\s*(${NUM})\\s*,\\s*(${NUM})\\s*,\\s*(${NUM})\\s*\\]$`),
      );
      return m ? [parseFloat(m[1]), parseFloat(m[2]), parseFloat(m[3])] : null;
    }
    case "mcq-letter": {
      return /^[A-Da-d]$/.test(trimmed) ? trimmed.toUpperCase() : null;
    }
    case "label": {
      if (labels && labels.length) {
        const lowered = trimmed.toLowerCase();
        for (const cand of labels) {
          if (lowered === cand.toLowerCase()) return cand;
        }
        return null;
      }
      return trimmed.length ? trimmed : null;
    }
  }
}

function fallbackSearch(response: string, kind: AnswerKind, labels: string[] | null): Extracted {
  switch (kind) {
    case "scalar-mm":
    case "scalar-deg": {
      const hits = allMatches(NUM_RE, response);
      return hits.length ? parseFloat(hits[hits.length - 1][0]) : null;
    }
    case "coordinate-pair": {
      const hits = allMatches(PAIR_RE, response);
      if (!hits.length) return null;
      const last = hits[hits.length - 1];
      return [parseFloat(last[1]), parseFloat(last[2])];
    }
    case "vector-3": {
      const hits = allMatches(TRIPLE_RE, response);
      if (!hits.length) return null;
      const last = hits[hits.length - 1];
      return [parseFloat(last[1]), parseFloat(last[2]), parseFloat(last[3])];
    }
    case "mcq-letter": {
      const hits = allMatches(LETTER_RE, response);
      return hits.length ? hits[hits.length - 1][1].toUpperCase() : null;
    }
    case "label": {
      if (!labels || !labels.length) return null;
      let best: string | null = null;
      let bestPos = -1;
      for (const cand of labels) {
        const re = new RegExp(`\\b${cand}\\b`, "gi");
        for (const m of response.matchAll(re)) {
          if ((m.index ?? -1) > bestPos) {
            bestPos = m.index ?? -1;
            best = cand;
          }
        }
      }
      return best;
    }
  }
}

/** Pull a kind-shaped prediction from a free-form response; null = failure. */
export function extractAnswer(
  response: string,
  kind: AnswerKind,
  labels: string[] | null = null,
): Extracted {
  if (!response) return null;
  const regions = allMatches(BACKTICK_RE, response);
  if (regions.length) {
    const parsed = parseRegion(regions[regions.length - 1][1], kind, labels);
    if (parsed !== null) return parsed;
  }
  return fallbackSearch(response, kind, labels);
}

export function denormalizeCoordinate(
  pair: number[],
  width: number,
  height: number,
): [number, number] {
  return [(pair[0] / 1000) * width, (pair[1] / 1000) * height];
}

/** Verdict for an already-parsed prediction. Coordinates are pixel-space. */
export function scoreValue(
  pred: Extracted,
  gt: string | number | number[],
  kind: AnswerKind,
  imageWidth?: number,
): boolean {
  if (pred === null) return false;
  switch (kind) {
    case "label":
    case "mcq-letter":
      return String(pred).trim().toLowerCase() === String(gt).trim().toLowerCase();
    case "scalar-mm":
    case "scalar-deg":
      return Math.abs(Number(pred) - Number(gt)) <= 0.2 * Math.abs(Number(gt));
    case "vector-3": {
      const p = pred as number[];
      const g = gt as number[];
      if (!Array.isArray(p) || p.length !== 3 || !Array.isArray(g) || g.length !== 3) {
        return false;
      }
      // sqrt of the summed squares (not hypot) to match reference numerics
      const err = l2(p[0] - g[0], p[1] - g[1], p[2] - g[2]);
      return err <= 0.2 * l2(g[0], g[1], g[2]);
    }
    case "coordinate-pair": {
      if (imageWidth === undefined) {
        throw new Error("coordinate scoring needs the answer image's width");
      }
      const p = pred as number[];
      const g = gt as number[];
      if (!Array.isArray(p) || p.length !== 2 || !Array.isArray(g) || g.length !== 2) {
        return false;
      }
      return l2(p[0] - g[0], p[1] - g[1]) <= 0.05 * imageWidth;
    }
  }
}

/** Extract + score one benchmark sample against a raw response string. */
export function scoreSample(sample: CorpusSample, response: string | undefined): EvalRecord {
  const kind = answerKindOf(sample.subtask);
  const labels = labelVocabularyOf(sample.subtask);
  const gt = sample.ground_truth.value;
  const pred = extractAnswer(response ?? "", kind, labels);
  let correct: boolean;
  if (kind === "coordinate-pair") {
    const w = Number(sample.meta.image_width);
    const h = Number(sample.meta.image_height);
    correct =
      pred !== null &&
      scoreValue(
        denormalizeCoordinate(pred as number[], w, h),
        denormalizeCoordinate(gt as number[], w, h),
        kind,
        w,
      );
  } else {
    correct = scoreValue(pred, gt, kind);
  }
  return {
    sample_id: sample.sample_id,
    subtask: sample.subtask,
    kind,
    prediction: pred,
    ground_truth: gt,
    correct,
  };
}

/** Per-subtask accuracies plus the unweighted subtask mean. */
export function aggregate(records: EvalRecord[]): Report {
  const report: Report = {
    n_records: records.length,
    overall_mean_pct: null,
    pooled_pct: null,
    per_subtask: {},
    records,
  };
  if (!records.length) return report;
  const bySubtask = new Map<string, EvalRecord[]>();
  for (const r of records) {
    const group = bySubtask.get(r.subtask) ?? [];
    group.push(r);
    bySubtask.set(r.subtask, group);
  }
  const accs: number[] = [];
  for (const subtask of [...bySubtask.keys()].sort()) {
    const group = bySubtask.get(subtask)!;
    const nCorrect = group.filter((r) => r.correct).length;
    const acc = (100 * nCorrect) / group.length;
    report.per_subtask[subtask] = {
      total: group.length,
      correct: nCorrect,
      accuracy_pct: acc,
    };
    accs.push(acc);
  }
  report.overall_mean_pct = accs.reduce((a, b) => a + b, 0) / accs.length;
  report.pooled_pct = (100 * records.filter((r) => r.correct).length) / records.length;
  return report;
}

/**
 * Score a responses map against benchmark samples: the cross-check entry
 * point. Missing responses count as extraction failures (incorrect).
 */
export function crosscheckScore(
  samples: Iterable<CorpusSample>,
  responses: Map<string, string>,
): Report {
  const records: EvalRecord[] = [];
  for (const sample of samples) {
    records.push(scoreSample(sample, responses.get(sample.sample_id)));
  }
  return aggregate(records);
}
