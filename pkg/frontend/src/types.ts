/**
 * Shared shapes for spatialqa corpora and evaluation reports.
 *
 * These mirror the JSONL / manifest format the engine emits; unknown extra
 * fields are preserved on load for forward compatibility.
 */

export const ANSWER_KINDS = [
  "label",
  "mcq-letter",
  "scalar-mm",
  "scalar-deg",
  "coordinate-pair",
  "vector-3",
] as const;

export type AnswerKind = (typeof ANSWER_KINDS)[number];

export interface GroundTruth {
  kind: AnswerKind;
  value: string | number | number[];
}

export interface SampleMeta {
  scene_id: string;
  seed: number;
  image_width: number;
  image_height: number;
  [extra: string]: unknown;
}

export interface CorpusSample {
  sample_id: string;
  subtask: string;
  images: string[];
  question: string;
  answer: string;
  ground_truth: GroundTruth;
  referencing: string;
  meta: SampleMeta;
  [extra: string]: unknown;
}

export interface ImageHandle {
  path: string;
  format: "png" | "jpeg";
  width?: number;
  height?: number;
}

/** A corpus sample with its images located and header-decoded. */
export interface LoadedSample {
  sample: CorpusSample;
  images: ImageHandle[];
}

export interface CorpusManifest {
  format_version: number;
  config_hash: string;
  global_seed: number;
  counts: Record<string, Record<string, number>>;
  files: Record<string, string>;
  [extra: string]: unknown;
}

export interface EvalRecord {
  sample_id: string;
  subtask: string;
  kind: AnswerKind;
  prediction: string | number | number[] | null;
  ground_truth: string | number | number[];
  correct: boolean;
}

export interface SubtaskRow {
  total: number;
  correct: number;
  accuracy_pct: number;
}

export interface Report {
  n_records: number;
  overall_mean_pct: number | null;
  pooled_pct: number | null;
  per_subtask: Record<string, SubtaskRow>;
  records: EvalRecord[];
}

/** Answer kind per subtask id (object-movement ids carry a source suffix). */
export function answerKindOf(subtask: string): AnswerKind {
  if (subtask.startsWith("depth_value")) return "scalar-mm";
  if (subtask.startsWith("depth_comparison")) return "label";
  if (subtask === "correspondence_mcq") return "mcq-letter";
  if (subtask === "correspondence_coord") return "coordinate-pair";
  if (subtask.startsWith("camera_translation_direction")) return "label";
  if (subtask.startsWith("camera_rotation_direction")) return "label";
  if (subtask === "camera_translation_distance") return "scalar-mm";
  if (subtask === "camera_rotation_angle") return "scalar-deg";
  if (subtask === "camera_translation_vector") return "vector-3";
  if (subtask === "camera_orientation_degree") return "scalar-deg";
  if (subtask.startsWith("object_movement_distance")) return "scalar-mm";
  if (subtask.startsWith("object_movement_vector")) return "vector-3";
  if (subtask.startsWith("object_size")) return "scalar-mm";
  throw new Error(`unknown subtask id: ${subtask}`);
}

/** Label vocabulary for label-kind subtasks (drives extraction fallback). */
export function labelVocabularyOf(subtask: string): string[] | null {
  if (subtask.startsWith("depth_comparison")) return ["A", "B"];
  if (subtask === "camera_translation_direction_lateral") return ["left", "right"];
  if (subtask === "camera_translation_direction_vertical") return ["up", "down"];
  if (subtask === "camera_translation_direction_longitudinal") return ["forward", "backward"];
  if (subtask === "camera_rotation_direction_yaw") return ["left", "right"];
  if (subtask === "camera_rotation_direction_tilt") return ["up", "down"];
  return null;
}
