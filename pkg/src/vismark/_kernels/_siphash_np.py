"""Pure-numpy SipHash-2-4 kernel, vectorized over arrays of message words.

Every message is exactly 8 bytes long and is passed in already packed as a
little-endian uint64 word, so the compression phase is a single block
followed by the fixed-length finalization block (length byte = 8).
"""

import numpy as np

_U = np.uint64
_V0_INIT = _U(0x736F6D6570736575)
_V1_INIT = _U(0x646F72616E646F6D)
_V2_INIT = _U(0x6C7967656E657261)
_V3_INIT = _U(0x7465646279746573)
_LEN_BLOCK = _U(8 << 56)  # final block: 8 message bytes, no residue
_FF = _U(0xFF)


def _rotl(x, b):
    return (x << _U(b)) | (x >> _U(64 - b))


def _sipround(v0, v1, v2, v3):
    v0 = v0 + v1
    v1 = _rotl(v1, 13) ^ v0
    v0 = _rotl(v0, 32)
    v2 = v2 + v3
    v3 = _rotl(v3, 16) ^ v2
    v0 = v0 + v3
    v3 = _rotl(v3, 21) ^ v0
    v2 = v2 + v1
    v1 = _rotl(v1, 17) ^ v2
    v2 = _rotl(v2, 32)
    return v0, v1, v2, v3


def siphash24_words(k0: int, k1: int, words: np.ndarray) -> np.ndarray:
    """SipHash-2-4 of each 8-byte message in `words`, keyed by (k0, k1).

    `words` holds the messages packed as little-endian uint64; the return
    value is a uint64 array of the same length.
    """
    m = np.ascontiguousarray(words, dtype=np.uint64)
    k0 = _U(k0)
    k1 = _U(k1)
    with np.errstate(over="ignore"):
        v0 = np.full(m.shape, _V0_INIT ^ k0, dtype=np.uint64)
        v1 = np.full(m.shape, _V1_INIT ^ k1, dtype=np.uint64)
        v2 = np.full(m.shape, _V2_INIT ^ k0, dtype=np.uint64)
        v3 = np.full(m.shape, _V3_INIT ^ k1, dtype=np.uint64)

        v3 ^= m
        v0, v1, v2, v3 = _sipround(v0, v1, v2, v3)
        v0, v1, v2, v3 = _sipround(v0, v1, v2, v3)
        v0 ^= m

        v3 ^= _LEN_BLOCK
        v0, v1, v2, v3 = _sipround(v0, v1, v2, v3)
        v0, v1, v2, v3 = _sipround(v0, v1, v2, v3)
        v0 ^= _LEN_BLOCK

        v2 ^= _FF
        for _ in range(4):
            v0, v1, v2, v3 = _sipround(v0, v1, v2, v3)

        return v0 ^ v1 ^ v2 ^ v3
