/**
 * Per-step logits processor for generation pipelines.
 *
 * A handle owns the watermark parameters and the scene-static saliency
 * ranking; each generation stream gets its own cursor holding the
 * previous-token PRF seed. Logits arrive as contiguous 32-bit real
 * buffers (or any numeric array), probabilities leave as Float32Array.
 */

import { readFileSync } from "node:fs";

import { readEmb1 } from "./emb1.js";
import { boostMask, buildPartition, softmax, stepEntropy, type WatermarkParams } from "./partition.js";
import { fuseAndRank, sceneFromMatrix, type RankedVocabulary, type Scene } from "./saliency.js";
import { parseKeyHex, SENTINEL_PREV_TOKEN } from "./siphash.js";
import { filterLinguistic, loadDecodeTable, type LinguisticVocab } from "./vocab.js";

export interface RankingRecord {
  token_id: number;
  phi: number;
  lpa_n: number;
  gsc_n: number;
  ccs_n: number;
}

/** Parse the watermark section of a run-config blob (CLI-identical JSON). */
export function parseConfigBlob(blob: string | object): WatermarkParams {
  const obj = typeof blob === "string" ? JSON.parse(blob) : blob;
  const wm = (obj as Record<string, any>).watermark;
  if (!wm || typeof wm.key !== "string") {
    throw new Error("config blob needs a watermark section with a hex key");
  }
  const params: WatermarkParams = {
    key: parseKeyHex(wm.key),
    alpha: wm.alpha ?? 0.025,
    gamma: wm.gamma ?? 0.5,
    delta: wm.delta ?? 2.0,
    epsilon: wm.epsilon ?? 1e-8,
  };
  if (!(params.alpha >= 0.01 && params.alpha <= 0.1)) {
    throw new Error(`alpha=${params.alpha} outside [0.01, 0.1]`);
  }
  if (!(params.gamma >= params.alpha && params.gamma < 1)) {
    throw new Error(`gamma=${params.gamma} outside [alpha, 1)`);
  }
  if (!(params.delta >= 0)) {
    throw new Error(`delta=${params.delta} must be >= 0`);
  }
  if (!(params.epsilon > 0)) {
    throw new Error(`epsilon=${params.epsilon} must be > 0`);
  }
  return params;
}

export class ProcessorStream {
  private prev: number = SENTINEL_PREV_TOKEN;

  constructor(private readonly handle: ProcessorHandle) {}

  /** Adjust one step's logits using this stream's previous token. */
  processLogits(logits: ArrayLike<number>): Float32Array {
    return this.handle.processLogits(this.prev, logits);
  }

  /** Record the token that was actually emitted for this stream. */
  observe(tokenId: number): void {
    this.prev = tokenId >>> 0;
  }

  get prevToken(): number {
    return this.prev;
  }
}

export class ProcessorHandle {
  constructor(
    readonly params: WatermarkParams,
    readonly vocab: LinguisticVocab,
    readonly scene: Scene,
    readonly ranked: RankedVocabulary,
  ) {}

  get vocabSize(): number {
    return this.vocab.ids.length;
  }

  /** One stream per concurrent generation; never share streams. */
  newStream(): ProcessorStream {
    return new ProcessorStream(this);
  }

  /** Saliency ordering in the CLI `rank` record format. */
  rankingRecords(): RankingRecord[] {
    const s = this.ranked.scores;
    return Array.from(this.ranked.order, (row) => ({
      token_id: this.vocab.ids[row],
      phi: s.phi[row],
      lpa_n: s.lpaN[row],
      gsc_n: s.gscN[row],
      ccs_n: s.ccsN[row],
    }));
  }

  /** Boost the step's boosted set and renormalize; delta=0 is exact softmax. */
  processLogits(prevToken: number, logits: ArrayLike<number>): Float32Array {
    const L = this.vocab.ids.length;
    if (logits.length !== L) {
      throw new Error(`got ${logits.length} logits for a vocabulary of ${L}`);
    }
    const z = Float64Array.from(logits as ArrayLike<number>);
    for (const v of z) {
      if (!Number.isFinite(v)) throw new Error("logits contain non-finite entries");
    }
    const info = stepEntropy(z, this.params.epsilon);
    const part = buildPartition(this.ranked, info, this.params, prevToken >>> 0);
    if (this.params.delta > 0) {
      const mask = boostMask(part, this.ranked, this.params.key);
      for (let i = 0; i < L; i++) {
        if (mask[i]) z[i] += this.params.delta;
      }
    }
    return Float32Array.from(softmax(z));
  }
}

/** Build a handle from a config blob plus vocabulary and scene files. */
export function makeProcessor(
  configBlob: string | object,
  vocabEmbPath: string,
  decodePath: string,
  scenePath: string,
): ProcessorHandle {
  const params = parseConfigBlob(configBlob);
  const emb = readEmb1(vocabEmbPath);
  let decode: Map<number, string>;
  try {
    decode = loadDecodeTable(decodePath);
  } catch (err) {
    throw new Error(`${decodePath}: ${(err as Error).message}`);
  }
  const vocab = filterLinguistic(decode, emb);
  const scene = sceneFromMatrix(readEmb1(scenePath), scenePath);
  if (scene.dim !== vocab.dim) {
    throw new Error(
      `${scenePath}: scene dimension ${scene.dim} != vocabulary dimension ${vocab.dim}`,
    );
  }
  return new ProcessorHandle(params, vocab, scene, fuseAndRank(vocab, scene));
}

/** Convenience: read a config blob from disk. */
export function makeProcessorFromFiles(
  configPath: string,
  vocabEmbPath: string,
  decodePath: string,
  scenePath: string,
): ProcessorHandle {
  return makeProcessor(
    readFileSync(configPath, "utf-8"),
    vocabEmbPath,
    decodePath,
    scenePath,
  );
}
