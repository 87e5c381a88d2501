/**
 * Corpus loading with line-exact schema validation and image resolution.
 *
 * Validation is hand-rolled over plain parsed JSON (no schema library) so
 * the consumer stays dependency-light. Unknown extra fields pass through
 * untouched. Schema problems raise with the offending file:line; missing
 * or undecodable images raise with the sample id.
 */

import { createReadStream, promises as fs } from "node:fs";
import { createInterface } from "node:readline";
import * as path from "node:path";

import {
  ANSWER_KINDS,
  type CorpusManifest,
  type CorpusSample,
  type ImageHandle,
  type LoadedSample,
} from "./types.js";

export class CorpusError extends Error {}

const PNG_MAGIC = Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]);

function fail(where: string, message: string): never {
  throw new CorpusError(`${where}: ${message}`);
}

function expectString(doc: Record<string, unknown>, key: string, where: string): string {
  const v = doc[key];
  if (typeof v !== "string" || !v.length) fail(where, `field "${key}" must be a non-empty string`);
  return v;
}

function expectNumber(doc: Record<string, unknown>, key: string, where: string): number {
  const v = doc[key];
  if (typeof v !== "number" || !Number.isFinite(v)) fail(where, `field "${key}" must be a finite number`);
  return v;
}

function isNumberArray(v: unknown, n: number): v is number[] {
  return Array.isArray(v) && v.length === n && v.every((x) => typeof x === "number");
}

/** Validate one parsed JSONL row; returns it typed, extras preserved. */
export function validateSample(doc: unknown, where: string): CorpusSample {
  if (typeof doc !== "object" || doc === null || Array.isArray(doc)) {
    fail(where, "row must be a JSON object");
  }
  const row = doc as Record<string, unknown>;
  expectString(row, "sample_id", where);
  expectString(row, "subtask", where);
  expectString(row, "question", where);
  expectString(row, "answer", where);
  expectString(row, "referencing", where);

  const images = row["images"];
  if (!Array.isArray(images) || !images.length || !images.every((p) => typeof p === "string")) {
    fail(where, 'field "images" must be a non-empty array of paths');
  }

  const gt = row["ground_truth"];
  if (typeof gt !== "object" || gt === null) fail(where, 'missing "ground_truth" object');
  const gtRow = gt as Record<string, unknown>;
  const kind = gtRow["kind"];
  if (typeof kind !== "string" || !(ANSWER_KINDS as readonly string[]).includes(kind)) {
    fail(where, `ground_truth.kind must be one of ${ANSWER_KINDS.join(", ")}`);
  }
  const value = gtRow["value"];
  const valueOk =
    kind === "label" || kind === "mcq-letter"
      ? typeof value === "string"
      : kind === "coordinate-pair"
        ? isNumberArray(value, 2)
        : kind === "vector-3"
          ? isNumberArray(value, 3)
          : typeof value === "number";
  if (!valueOk) fail(where, `ground_truth.value does not match kind "${kind}"`);

  const meta = row["meta"];
  if (typeof meta !== "object" || meta === null) fail(where, 'missing "meta" object');
  const metaRow = meta as Record<string, unknown>;
  expectString(metaRow, "scene_id", where);
  expectNumber(metaRow, "seed", where);
  expectNumber(metaRow, "image_width", where);
  expectNumber(metaRow, "image_height", where);

  return row as unknown as CorpusSample;
}

/** Light "does it decode" check: magic bytes plus PNG IHDR dimensions. */
export async function probeImage(filePath: string, sampleId: string): Promise<ImageHandle> {
  let handle;
  try {
    handle = await fs.open(filePath, "r");
  } catch {
    throw new CorpusError(`sample ${sampleId}: image missing: ${filePath}`);
  }
  try {
    const buf = Buffer.alloc(26);
    const { bytesRead } = await handle.read(buf, 0, 26, 0);
    if (bytesRead >= 8 && buf.subarray(0, 8).equals(PNG_MAGIC)) {
      if (bytesRead < 24 || buf.subarray(12, 16).toString("ascii") !== "IHDR") {
        throw new CorpusError(`sample ${sampleId}: corrupt PNG header: ${filePath}`);
      }
      return {
        path: filePath,
        format: "png",
        width: buf.readUInt32BE(16),
        height: buf.readUInt32BE(20),
      };
    }
    if (bytesRead >= 3 && buf[0] === 0xff && buf[1] === 0xd8 && buf[2] === 0xff) {
      return { path: filePath, format: "jpeg" };
    }
    throw new CorpusError(`sample ${sampleId}: not a PNG/JPEG image: ${filePath}`);
  } finally {
    await handle.close();
  }
}

export async function readManifest(corpusRoot: string): Promise<CorpusManifest> {
  const manifestPath = path.join(corpusRoot, "manifest.json");
  let raw: string;
  try {
    raw = await fs.readFile(manifestPath, "utf-8");
  } catch {
    throw new CorpusError(`no manifest.json under ${corpusRoot}`);
  }
  const doc = JSON.parse(raw) as CorpusManifest;
  if (typeof doc.files !== "object" || doc.files === null) {
    throw new CorpusError(`${manifestPath}: manifest lacks a "files" map`);
  }
  return doc;
}

export interface LoadOptions {
  /** which manifest files to walk; default: every split in the manifest */
  splits?: string[];
  /** skip the on-disk image probe (schema validation only) */
  resolveImages?: boolean;
}

/**
 * Lazily iterate a corpus, validating each line and resolving its images.
 *
 * Yields one LoadedSample per JSONL row, in file order. Throws CorpusError
 * naming the file and line for schema violations, or the sample id for
 * image problems.
 */
export async function* loadCorpus(
  corpusRoot: string,
  options: LoadOptions = {},
): AsyncGenerator<LoadedSample> {
  const manifest = await readManifest(corpusRoot);
  const splits = options.splits ?? Object.keys(manifest.files).sort();
  const resolveImages = options.resolveImages ?? true;
  for (const split of splits) {
    const rel = manifest.files[split];
    if (rel === undefined) throw new CorpusError(`manifest has no file for split "${split}"`);
    const filePath = path.join(corpusRoot, rel);
    const lines = createInterface({
      input: createReadStream(filePath, { encoding: "utf-8" }),
      crlfDelay: Infinity,
    });
    let lineNo = 0;
    for await (const line of lines) {
      lineNo += 1;
      if (!line.trim()) continue;
      const where = `${rel}:${lineNo}`;
      let doc: unknown;
      try {
        doc = JSON.parse(line);
      } catch (err) {
        fail(where, `bad JSON: ${(err as Error).message}`);
      }
      const sample = validateSample(doc, where);
      const images: ImageHandle[] = [];
      if (resolveImages) {
        for (const img of sample.images) {
          images.push(await probeImage(path.join(corpusRoot, img), sample.sample_id));
        }
      }
      yield { sample, images };
    }
  }
}

/** Convenience: drain the iterator (used by tests and simple consumers). */
export async function loadAll(
  corpusRoot: string,
  options: LoadOptions = {},
): Promise<LoadedSample[]> {
  const out: LoadedSample[] = [];
  for await (const item of loadCorpus(corpusRoot, options)) out.push(item);
  return out;
}

/** Read a benchmark JSONL directly (no manifest), validating each line. */
export async function readBenchmarkFile(filePath: string): Promise<CorpusSample[]> {
  const out: CorpusSample[] = [];
  const lines = createInterface({
    input: createReadStream(filePath, { encoding: "utf-8" }),
    crlfDelay: Infinity,
  });
  let lineNo = 0;
  for await (const line of lines) {
    lineNo += 1;
    if (!line.trim()) continue;
    const where = `${path.basename(filePath)}:${lineNo}`;
    let doc: unknown;
    try {
      doc = JSON.parse(line);
    } catch (err) {
      fail(where, `bad JSON: ${(err as Error).message}`);
    }
    out.push(validateSample(doc, where));
  }
  return out;
}

/** Read a responses JSONL ({sample_id, response} per line) into a map. */
export async function readResponsesFile(filePath: string): Promise<Map<string, string>> {
  const out = new Map<string, string>();
  const lines = createInterface({
    input: createReadStream(filePath, { encoding: "utf-8" }),
    crlfDelay: Infinity,
  });
  let lineNo = 0;
  for await (const line of lines) {
    lineNo += 1;
    if (!line.trim()) continue;
    const where = `${path.basename(filePath)}:${lineNo}`;
    let doc: Record<string, unknown>;
    try {
      doc = JSON.parse(line) as Record<string, unknown>;
    } catch (err) {
      fail(where, `bad JSON: ${(err as Error).message}`);
    }
    const id = doc["sample_id"];
    if (typeof id !== "string") fail(where, 'missing "sample_id"');
    out.set(id, String(doc["response"] ?? ""));
  }
  return out;
}
