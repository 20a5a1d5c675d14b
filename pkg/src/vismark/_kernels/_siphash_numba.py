"""Numba-compiled SipHash-2-4 kernel (scalar loop over message words).

uint64 arithmetic wraps modulo 2^64 in nopython mode, so no explicit
masking is needed; constants are cast with np.uint64 to keep the whole
computation in unsigned 64-bit lanes.
"""

import numpy as np
from numba import njit

_S13 = np.uint64(13)
_S16 = np.uint64(16)
_S17 = np.uint64(17)
_S21 = np.uint64(21)
_S32 = np.uint64(32)
_S43 = np.uint64(43)
_S47 = np.uint64(47)
_S48 = np.uint64(48)
_S51 = np.uint64(51)
_V0_INIT = np.uint64(0x736F6D6570736575)
_V1_INIT = np.uint64(0x646F72616E646F6D)
_V2_INIT = np.uint64(0x6C7967656E657261)
_V3_INIT = np.uint64(0x7465646279746573)
_LEN_BLOCK = np.uint64(8 << 56)
_FF = np.uint64(0xFF)


@njit("uint64[:](uint64, uint64, uint64[:])", cache=True, nogil=True)
def siphash24_words(k0, k1, words):
    out = np.empty(words.shape[0], dtype=np.uint64)
    for i in range(words.shape[0]):
        m = words[i]
        v0 = _V0_INIT ^ k0
        v1 = _V1_INIT ^ k1
        v2 = _V2_INIT ^ k0
        v3 = _V3_INIT ^ k1

        v3 ^= m
        for _ in range(2):
            v0 += v1
            v1 = ((v1 << _S13) | (v1 >> _S51)) ^ v0
            v0 = (v0 << _S32) | (v0 >> _S32)
            v2 += v3
            v3 = ((v3 << _S16) | (v3 >> _S48)) ^ v2
            v0 += v3
            v3 = ((v3 << _S21) | (v3 >> _S43)) ^ v0
            v2 += v1
            v1 = ((v1 << _S17) | (v1 >> _S47)) ^ v2
            v2 = (v2 << _S32) | (v2 >> _S32)
        v0 ^= m

        v3 ^= _LEN_BLOCK
        for _ in range(2):
            v0 += v1
            v1 = ((v1 << _S13) | (v1 >> _S51)) ^ v0
            v0 = (v0 << _S32) | (v0 >> _S32)
            v2 += v3
            v3 = ((v3 << _S16) | (v3 >> _S48)) ^ v2
            v0 += v3
            v3 = ((v3 << _S21) | (v3 >> _S43)) ^ v0
            v2 += v1
            v1 = ((v1 << _S17) | (v1 >> _S47)) ^ v2
            v2 = (v2 << _S32) | (v2 >> _S32)
        v0 ^= _LEN_BLOCK

        v2 ^= _FF
        for _ in range(4):
            v0 += v1
            v1 = ((v1 << _S13) | (v1 >> _S51)) ^ v0
            v0 = (v0 << _S32) | (v0 >> _S32)
            v2 += v3
            v3 = ((v3 << _S16) | (v3 >> _S48)) ^ v2
            v0 += v3
            v3 = ((v3 << _S21) | (v3 >> _S43)) ^ v0
            v2 += v1
            v1 = ((v1 << _S17) | (v1 >> _S47)) ^ v2
            v2 = (v2 << _S32) | (v2 >> _S32)

        out[i] = v0 ^ v1 ^ v2 ^ v3
    return out
