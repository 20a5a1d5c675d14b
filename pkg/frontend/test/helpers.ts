import { execFileSync } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

/** Small deterministic PRNG so fixtures are stable across runs. */
export function mulberry32(seed: number): () => number {
  let state = seed | 0;
  return () => {
    state = (state + 0x6d2b79f5) | 0;
    let t = Math.imul(state ^ (state >>> 15), 1 | state);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

/** Run the core CLI and parse its JSON stdout. */
export function runCli(args: string[]): any {
  const stdout = execFileSync("python3", ["-m", "vismark.cli", ...args], {
    encoding: "utf-8",
    maxBuffer: 256 * 1024 * 1024,
  });
  return stdout.trim() ? JSON.parse(stdout) : undefined;
}

export function makeTempDir(prefix: string): string {
  return mkdtempSync(join(tmpdir(), prefix));
}

export function writeJson(path: string, obj: unknown): void {
  writeFileSync(path, JSON.stringify(obj));
}

export const KEY_HEX = "000102030405060708090a0b0c0d0e0f";

/** Run config shared with the CLI: small synthetic world for speed. */
export const RUN_CONFIG = {
  watermark: { key: KEY_HEX, alpha: 0.025, gamma: 0.5, delta: 2.0, epsilon: 1e-8 },
  lm: { seed: 11, vocab_size: 256, dim: 16, temperature: 8.0 },
  scene: { seed: 5, patches: 4, dim: 16 },
};
