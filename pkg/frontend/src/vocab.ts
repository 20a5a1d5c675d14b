/** Linguistic vocabulary restriction, mirroring the core's filter rule. */

import { readFileSync } from "node:fs";

import type { EmbMatrix } from "./emb1.js";

const LETTER = /\p{L}/u;
const DIGIT = /\p{Nd}/u;
const BOUNDARY_MARKERS = ["▁", "Ġ", " "];

/** At least one letter, no digit, after stripping one boundary marker. */
export function isLinguisticSurface(surface: string): boolean {
  let s = surface;
  if (s.length > 0 && BOUNDARY_MARKERS.includes(s[0])) {
    s = s.slice(1);
  }
  return LETTER.test(s) && !DIGIT.test(s);
}

export interface LinguisticVocab {
  fullSize: number;
  /** Retained ids, strictly increasing. */
  ids: Int32Array;
  /** One row per retained id, row-major, width `dim`. */
  embeddings: Float64Array;
  dim: number;
  decode: Map<number, string>;
  rowOf: Map<number, number>;
}

export function loadDecodeTable(path: string): Map<number, string> {
  const raw = JSON.parse(readFileSync(path, "utf-8")) as Record<string, string>;
  const out = new Map<number, string>();
  for (const [k, v] of Object.entries(raw)) {
    out.set(Number(k), String(v));
  }
  return out;
}

export function filterLinguistic(decode: Map<number, string>, emb: EmbMatrix): LinguisticVocab {
  const kept: number[] = [];
  for (let id = 0; id < emb.rows; id++) {
    const surface = decode.get(id);
    if (surface !== undefined && isLinguisticSurface(surface)) {
      kept.push(id);
    }
  }
  if (kept.length === 0) {
    throw new Error("linguistic filter retained no tokens");
  }
  const dim = emb.cols;
  const rows = new Float64Array(kept.length * dim);
  const rowOf = new Map<number, number>();
  kept.forEach((id, row) => {
    rowOf.set(id, row);
    let norm = 0;
    for (let j = 0; j < dim; j++) {
      const v = emb.data[id * dim + j];
      rows[row * dim + j] = v;
      norm += v * v;
    }
    if (norm === 0) {
      throw new Error(`linguistic token ${id} has a zero embedding row`);
    }
  });
  return {
    fullSize: emb.rows,
    ids: Int32Array.from(kept),
    embeddings: rows,
    dim,
    decode,
    rowOf,
  };
}

export function isLinguistic(vocab: LinguisticVocab, tokenId: number): boolean {
  return vocab.rowOf.has(tokenId);
}
