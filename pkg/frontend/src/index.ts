export {
  SENTINEL_PREV_TOKEN,
  UNKNOWN_TOKEN_ID,
  greenTest,
  greenUnit,
  hashPair,
  packPair,
  parseKeyHex,
  siphash24Word,
  type SipKey,
} from "./siphash.js";
export { decodeEmb1, encodeEmb1, readEmb1, type EmbMatrix } from "./emb1.js";
export {
  filterLinguistic,
  isLinguistic,
  isLinguisticSurface,
  loadDecodeTable,
  type LinguisticVocab,
} from "./vocab.js";
export {
  computeScores,
  fuseAndRank,
  sceneFromMatrix,
  type RankedVocabulary,
  type SaliencyScores,
  type Scene,
} from "./saliency.js";
export {
  boostMask,
  buildPartition,
  isHit,
  partitionRatios,
  softmax,
  stepEntropy,
  type EntropyInfo,
  type PartitionState,
  type WatermarkParams,
} from "./partition.js";
export {
  makeProcessor,
  makeProcessorFromFiles,
  parseConfigBlob,
  ProcessorHandle,
  ProcessorStream,
  type RankingRecord,
} from "./processor.js";
export {
  DEFAULT_THRESHOLD_Z,
  MIN_COUNTABLE_POSITIONS,
  detectModelFree,
  erfc,
  zScore,
  type DetectionReport,
} from "./detector.js";
