/** Step entropy, ratio split, and the per-step keyed partition. */

import { greenTest, hashPair, type SipKey } from "./siphash.js";
import type { RankedVocabulary } from "./saliency.js";

const TWO64 = 2 ** 64;

export interface WatermarkParams {
  key: SipKey;
  alpha: number;
  gamma: number;
  delta: number;
  epsilon: number;
}

export interface EntropyInfo {
  h: number;
  hNorm: number;
}

export function softmax(logits: ArrayLike<number>): Float64Array {
  let peak = -Infinity;
  for (let i = 0; i < logits.length; i++) if (logits[i] > peak) peak = logits[i];
  const out = new Float64Array(logits.length);
  let total = 0;
  for (let i = 0; i < logits.length; i++) {
    const e = Math.exp(logits[i] - peak);
    out[i] = e;
    total += e;
  }
  for (let i = 0; i < out.length; i++) out[i] /= total;
  return out;
}

export function stepEntropy(logits: ArrayLike<number>, epsilon: number): EntropyInfo {
  const L = logits.length;
  if (L < 2) {
    throw new Error(`step entropy needs at least 2 logits, got ${L}`);
  }
  for (let i = 0; i < L; i++) {
    if (!Number.isFinite(logits[i])) {
      throw new Error("logits contain non-finite entries");
    }
  }
  const p = softmax(logits);
  let h = 0;
  for (let i = 0; i < L; i++) {
    const q = (p[i] + epsilon) / (1 + L * epsilon);
    h -= q * Math.log(q);
  }
  const hMax = Math.log(L);
  h = Math.min(h, hMax);
  return { h, hNorm: h / hMax };
}

export function partitionRatios(
  hNorm: number,
  params: WatermarkParams,
): { etaT: number; gammaT: number } {
  if (!(hNorm >= 0 && hNorm <= 1)) {
    throw new Error(`normalized entropy ${hNorm} outside [0, 1]`);
  }
  const etaT = params.alpha * (1 - hNorm);
  return { etaT, gammaT: params.gamma - etaT };
}

export interface PartitionState {
  etaT: number;
  gammaT: number;
  sctCount: number;
  greenThreshold: number;
  prevToken: number;
  /** Linguistic row indices of the deterministic boosted prefix. */
  sctRows: Set<number>;
}

export function buildPartition(
  ranked: RankedVocabulary,
  info: EntropyInfo,
  params: WatermarkParams,
  prevToken: number,
): PartitionState {
  const { etaT, gammaT } = partitionRatios(info.hNorm, params);
  const size = ranked.order.length;
  const sctCount = Math.floor(etaT * size);
  const threshold = gammaT / (1 - etaT);
  const sctRows = new Set<number>();
  for (let i = 0; i < sctCount; i++) sctRows.add(ranked.order[i]);
  return { etaT, gammaT, sctCount, greenThreshold: threshold, prevToken, sctRows };
}

/** Boolean boost mask over linguistic rows: prefix plus green members. */
export function boostMask(
  part: PartitionState,
  ranked: RankedVocabulary,
  key: SipKey,
): Uint8Array {
  const ids = ranked.vocab.ids;
  const mask = new Uint8Array(ids.length);
  for (let row = 0; row < ids.length; row++) {
    const unit = Number(hashPair(key, part.prevToken, ids[row])) / TWO64;
    mask[row] = unit < part.greenThreshold ? 1 : 0;
  }
  for (const row of part.sctRows) mask[row] = 1;
  return mask;
}

export function isHit(
  part: PartitionState,
  ranked: RankedVocabulary,
  key: SipKey,
  tokenId: number,
): boolean {
  const row = ranked.vocab.rowOf.get(tokenId);
  if (row === undefined) return false;
  if (part.sctRows.has(row)) return true;
  return greenTest(key, part.prevToken, tokenId, part.greenThreshold);
}
