/** EMB1 binary matrices: "EMB1" magic, u32 rows, u32 cols, f32 row-major (LE). */

import { readFileSync } from "node:fs";

export interface EmbMatrix {
  rows: number;
  cols: number;
  /** Row-major payload; float32 values widen exactly into doubles. */
  data: Float64Array;
}

export function decodeEmb1(buf: Buffer, context: string): EmbMatrix {
  if (buf.length < 4 || buf.toString("latin1", 0, 4) !== "EMB1") {
    throw new Error(`${context}: bad EMB1 magic`);
  }
  if (buf.length < 12) {
    throw new Error(`${context}: EMB1 header truncated (${buf.length} bytes)`);
  }
  const rows = buf.readUInt32LE(4);
  const cols = buf.readUInt32LE(8);
  if (rows < 1 || cols < 1) {
    throw new Error(`${context}: degenerate EMB1 shape ${rows}x${cols}`);
  }
  const need = 12 + 4 * rows * cols;
  if (buf.length < need) {
    throw new Error(`${context}: EMB1 payload truncated (${buf.length} < ${need} bytes)`);
  }
  if (buf.length > need) {
    throw new Error(`${context}: ${buf.length - need} trailing bytes after EMB1 payload`);
  }
  const data = new Float64Array(rows * cols);
  for (let i = 0; i < rows * cols; i++) {
    const v = buf.readFloatLE(12 + 4 * i);
    if (!Number.isFinite(v)) {
      throw new Error(`${context}: non-finite EMB1 entry at index ${i}`);
    }
    data[i] = v;
  }
  return { rows, cols, data };
}

export function readEmb1(path: string): EmbMatrix {
  let buf: Buffer;
  try {
    buf = readFileSync(path);
  } catch (err) {
    throw new Error(`${path}: ${(err as Error).message}`);
  }
  return decodeEmb1(buf, path);
}

/** Encode a matrix back into EMB1 bytes (used by tests and tooling). */
export function encodeEmb1(rows: number, cols: number, values: ArrayLike<number>): Buffer {
  if (values.length !== rows * cols) {
    throw new Error(`expected ${rows * cols} values, got ${values.length}`);
  }
  const buf = Buffer.alloc(12 + 4 * rows * cols);
  buf.write("EMB1", 0, "latin1");
  buf.writeUInt32LE(rows, 4);
  buf.writeUInt32LE(cols, 8);
  for (let i = 0; i < values.length; i++) {
    buf.writeFloatLE(Math.fround(values[i]), 12 + 4 * i);
  }
  return buf;
}
