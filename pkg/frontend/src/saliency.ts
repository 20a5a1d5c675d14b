/**
 * Visual-saliency scoring and ranking, the same chain as the core:
 * best-patch cosine, CLS cosine, attention-weighted patch cosine, each
 * min-max normalized, summed, and sorted descending (ties by id).
 */

import type { EmbMatrix } from "./emb1.js";
import type { LinguisticVocab } from "./vocab.js";

export interface Scene {
  /** P x d row-major patch matrix. */
  patches: Float64Array;
  numPatches: number;
  dim: number;
  cls: Float64Array;
}

/** Split an EMB1 matrix into a scene: row 0 is CLS, the rest patches. */
export function sceneFromMatrix(m: EmbMatrix, context: string): Scene {
  if (m.rows < 2) {
    throw new Error(`${context}: scene needs a CLS row plus at least one patch`);
  }
  const cls = m.data.slice(0, m.cols);
  const patches = m.data.slice(m.cols);
  let clsNorm = 0;
  for (const v of cls) clsNorm += v * v;
  if (clsNorm === 0) {
    throw new Error(`${context}: zero CLS vector`);
  }
  for (let p = 0; p < m.rows - 1; p++) {
    let norm = 0;
    for (let j = 0; j < m.cols; j++) norm += patches[p * m.cols + j] ** 2;
    if (norm === 0) {
      throw new Error(`${context}: zero patch row ${p}`);
    }
  }
  return { patches, numPatches: m.rows - 1, dim: m.cols, cls };
}

export interface SaliencyScores {
  lpa: Float64Array;
  gsc: Float64Array;
  ccs: Float64Array;
  lpaN: Float64Array;
  gscN: Float64Array;
  ccsN: Float64Array;
  phi: Float64Array;
}

export interface RankedVocabulary {
  /** Linguistic row indices, most salient first. */
  order: Int32Array;
  phi: Float64Array;
  scores: SaliencyScores;
  vocab: LinguisticVocab;
}

function normalizeInto(raw: Float64Array): Float64Array {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of raw) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  const out = new Float64Array(raw.length);
  if (hi > lo) {
    for (let i = 0; i < raw.length; i++) out[i] = (raw[i] - lo) / (hi - lo);
  }
  return out;
}

const clamp = (x: number) => Math.min(1, Math.max(-1, x));

export function computeScores(vocab: LinguisticVocab, scene: Scene): SaliencyScores {
  if (vocab.dim !== scene.dim) {
    throw new Error(`vocabulary dimension ${vocab.dim} != scene dimension ${scene.dim}`);
  }
  const L = vocab.ids.length;
  const P = scene.numPatches;
  const d = scene.dim;

  const patchNorm = new Float64Array(P);
  for (let p = 0; p < P; p++) {
    let s = 0;
    for (let j = 0; j < d; j++) s += scene.patches[p * d + j] ** 2;
    patchNorm[p] = Math.sqrt(s);
  }
  let clsNorm = 0;
  for (const v of scene.cls) clsNorm += v * v;
  clsNorm = Math.sqrt(clsNorm);

  const lpa = new Float64Array(L);
  const gsc = new Float64Array(L);
  const ccs = new Float64Array(L);
  const dots = new Float64Array(P);
  const cosines = new Float64Array(P);

  for (let row = 0; row < L; row++) {
    let tokNorm = 0;
    for (let j = 0; j < d; j++) tokNorm += vocab.embeddings[row * d + j] ** 2;
    tokNorm = Math.sqrt(tokNorm);

    let maxDot = -Infinity;
    for (let p = 0; p < P; p++) {
      let dot = 0;
      for (let j = 0; j < d; j++) {
        dot += scene.patches[p * d + j] * vocab.embeddings[row * d + j];
      }
      dots[p] = dot;
      cosines[p] = clamp(dot / (patchNorm[p] * tokNorm));
      if (dot > maxDot) maxDot = dot;
    }

    let best = -Infinity;
    for (let p = 0; p < P; p++) if (cosines[p] > best) best = cosines[p];
    lpa[row] = best;

    let clsDot = 0;
    for (let j = 0; j < d; j++) clsDot += scene.cls[j] * vocab.embeddings[row * d + j];
    gsc[row] = clamp(clsDot / (clsNorm * tokNorm));

    let wSum = 0;
    let acc = 0;
    for (let p = 0; p < P; p++) {
      const w = Math.exp(dots[p] - maxDot);
      wSum += w;
      acc += w * cosines[p];
    }
    ccs[row] = acc / wSum;
  }

  const lpaN = normalizeInto(lpa);
  const gscN = normalizeInto(gsc);
  const ccsN = normalizeInto(ccs);
  const phi = new Float64Array(L);
  for (let i = 0; i < L; i++) phi[i] = lpaN[i] + gscN[i] + ccsN[i];
  return { lpa, gsc, ccs, lpaN, gscN, ccsN, phi };
}

export function fuseAndRank(vocab: LinguisticVocab, scene: Scene): RankedVocabulary {
  const scores = computeScores(vocab, scene);
  const order = Int32Array.from({ length: vocab.ids.length }, (_, i) => i);
  // descending fused score, ascending row (== ascending id) on ties
  order.sort((a, b) => (scores.phi[b] !== scores.phi[a] ? scores.phi[b] - scores.phi[a] : a - b));
  return { order, phi: scores.phi, scores, vocab };
}
