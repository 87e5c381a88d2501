export {
  ANSWER_KINDS,
  answerKindOf,
  labelVocabularyOf,
  type AnswerKind,
  type CorpusManifest,
  type CorpusSample,
  type EvalRecord,
  type GroundTruth,
  type ImageHandle,
  type LoadedSample,
  type Report,
  type SubtaskRow,
} from "./types.js";

export {
  CorpusError,
  loadAll,
  loadCorpus,
  probeImage,
  readBenchmarkFile,
  readManifest,
  readResponsesFile,
  validateSample,
  type LoadOptions,
} from "./loader.js";

export {
  aggregate,
  crosscheckScore,
  denormalizeCoordinate,
  extractAnswer,
  scoreSample,
  scoreValue,
} from "./scorer.js";
