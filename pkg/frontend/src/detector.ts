/** Key-only watermark detection, field-compatible with the core reports. */

import { greenTest, parseKeyHex, type SipKey } from "./siphash.js";

export const MIN_COUNTABLE_POSITIONS = 16;
export const DEFAULT_THRESHOLD_Z = 4.0;

export interface DetectionReport {
  mode: "model_free";
  n: number;
  hits: number;
  z: number;
  p: number;
  threshold_z: number;
  verdict: boolean;
}

export function zScore(hits: number, n: number, gamma: number): number {
  if (n < 1) {
    throw new Error("z-score needs at least one counted position");
  }
  if (!(gamma > 0 && gamma < 1)) {
    throw new Error(`gamma=${gamma} outside (0, 1)`);
  }
  return (hits - gamma * n) / Math.sqrt(n * gamma * (1 - gamma));
}

/**
 * Complementary error function, ~1e-15 relative accuracy: Taylor series
 * of erf below 2, Lentz continued fraction above.
 */
export function erfc(x: number): number {
  if (x < 0) return 2 - erfc(-x);
  if (x < 2) {
    // erf(x) = 2/sqrt(pi) * sum (-1)^n x^(2n+1) / (n! (2n+1))
    let term = x;
    let sum = x;
    for (let n = 1; n < 120; n++) {
      term *= (-x * x) / n;
      const add = term / (2 * n + 1);
      sum += add;
      if (Math.abs(add) < 1e-18 * Math.abs(sum)) break;
    }
    return 1 - (2 / Math.sqrt(Math.PI)) * sum;
  }
  // sqrt(pi) e^{x^2} erfc(x) = 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
  // modified Lentz on D = x + K(a_k / x) with a_k = k/2
  const tiny = 1e-300;
  let f = x;
  let c = x;
  let d = 0;
  for (let k = 1; k <= 300; k++) {
    const a = k / 2;
    d = x + a * d;
    if (d === 0) d = tiny;
    c = x + a / c;
    if (c === 0) c = tiny;
    d = 1 / d;
    const delta = c * d;
    f *= delta;
    if (Math.abs(delta - 1) < 1e-17) break;
  }
  return Math.exp(-x * x) / (Math.sqrt(Math.PI) * f);
}

function normalUpperTail(z: number): number {
  return 0.5 * erfc(z / Math.SQRT2);
}

/**
 * Count keyed green hits over linguistic positions t >= 1 and z-test
 * them against the boosted fraction gamma.
 *
 * `isLinguistic` decides which token ids count; non-linguistic tokens
 * still serve as PRF seeds for their successors.
 */
export function detectModelFree(
  tokens: number[],
  keyHex: string,
  gamma: number,
  isLinguistic: (tokenId: number) => boolean,
  thresholdZ: number = DEFAULT_THRESHOLD_Z,
): DetectionReport {
  const key: SipKey = parseKeyHex(keyHex);
  let n = 0;
  let hits = 0;
  for (let t = 1; t < tokens.length; t++) {
    if (!isLinguistic(tokens[t])) continue;
    n += 1;
    if (greenTest(key, tokens[t - 1], tokens[t], gamma)) hits += 1;
  }
  if (n < MIN_COUNTABLE_POSITIONS) {
    throw new Error(`only ${n} countable positions (need ${MIN_COUNTABLE_POSITIONS})`);
  }
  const z = zScore(hits, n, gamma);
  return {
    mode: "model_free",
    n,
    hits,
    z,
    p: normalUpperTail(z),
    threshold_z: thresholdZ,
    verdict: z > thresholdZ,
  };
}
