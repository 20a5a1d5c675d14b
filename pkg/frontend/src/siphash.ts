/**
 * SipHash-2-4 over 8-byte messages, exact 64-bit semantics via BigInt.
 *
 * Green-list membership must agree bit-for-bit with the core: the hash
 * of the little-endian concatenation prev||candidate (two u32) is
 * divided by 2^64 in double precision and compared against the step
 * threshold. Number(BigInt) rounds to nearest, matching a uint64 ->
 * float64 cast, so both sides compute the identical double.
 */

const MASK = 0xffffffffffffffffn;
const V0 = 0x736f6d6570736575n;
const V1 = 0x646f72616e646f6dn;
const V2 = 0x6c7967656e657261n;
const V3 = 0x7465646279746573n;
const LEN_BLOCK = 8n << 56n; // messages are always exactly 8 bytes
const TWO64 = 2 ** 64;

/** PRF seed used for the first generation step (no predecessor). */
export const SENTINEL_PREV_TOKEN = 0xffffffff;

/** Reserved id for unresolvable surface tokens; never linguistic. */
export const UNKNOWN_TOKEN_ID = 0xfffffffe;

function rotl(x: bigint, b: bigint): bigint {
  return ((x << b) | (x >> (64n - b))) & MASK;
}

export interface SipKey {
  k0: bigint;
  k1: bigint;
}

/** Split a 32-hex-char key into its two little-endian u64 halves. */
export function parseKeyHex(keyHex: string): SipKey {
  if (!/^[0-9a-fA-F]{32}$/.test(keyHex)) {
    throw new Error("key must be exactly 32 hex characters");
  }
  const bytes = Buffer.from(keyHex, "hex");
  return { k0: bytes.readBigUInt64LE(0), k1: bytes.readBigUInt64LE(8) };
}

/** Hash one message word (8 bytes, packed little-endian). */
export function siphash24Word(key: SipKey, m: bigint): bigint {
  let v0 = V0 ^ key.k0;
  let v1 = V1 ^ key.k1;
  let v2 = V2 ^ key.k0;
  let v3 = V3 ^ key.k1;

  const round = () => {
    v0 = (v0 + v1) & MASK;
    v1 = rotl(v1, 13n) ^ v0;
    v0 = rotl(v0, 32n);
    v2 = (v2 + v3) & MASK;
    v3 = rotl(v3, 16n) ^ v2;
    v0 = (v0 + v3) & MASK;
    v3 = rotl(v3, 21n) ^ v0;
    v2 = (v2 + v1) & MASK;
    v1 = rotl(v1, 17n) ^ v2;
    v2 = rotl(v2, 32n);
  };

  v3 ^= m;
  round();
  round();
  v0 ^= m;

  v3 ^= LEN_BLOCK;
  round();
  round();
  v0 ^= LEN_BLOCK;

  v2 ^= 0xffn;
  round();
  round();
  round();
  round();
  return v0 ^ v1 ^ v2 ^ v3;
}

/** Pack (prev, candidate) u32 pair into the message word. */
export function packPair(prevToken: number, candidate: number): bigint {
  return (BigInt(prevToken >>> 0) | (BigInt(candidate >>> 0) << 32n)) & MASK;
}

/** Keyed hash of one (prev, candidate) pair. */
export function hashPair(key: SipKey, prevToken: number, candidate: number): bigint {
  return siphash24Word(key, packPair(prevToken, candidate));
}

/** Keyed uniform variate in [0, 1) for one pair. */
export function greenUnit(key: SipKey, prevToken: number, candidate: number): number {
  return Number(hashPair(key, prevToken, candidate)) / TWO64;
}

/** Membership test shared with the core: variate strictly below threshold. */
export function greenTest(
  key: SipKey,
  prevToken: number,
  candidate: number,
  threshold: number,
): boolean {
  return greenUnit(key, prevToken, candidate) < threshold;
}
