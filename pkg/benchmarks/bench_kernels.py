"""Throughput comparison of the keyed-hash kernel backends.

The generation hot loop evaluates one SipHash-2-4 per candidate token
per step (vocabulary-sized batches); detection evaluates one per
transition (sequence-sized batches). This script times both backends on
those shapes and prints hashes/second plus the speedup.

Run: python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from vismark._kernels import _siphash_np

try:
    from vismark._kernels import _siphash_numba
except ImportError:
    _siphash_numba = None

K0 = np.uint64(0x0706050403020100)
K1 = np.uint64(0x0F0E0D0C0B0A0908)


def bench(impl, words: np.ndarray, repeats: int) -> float:
    impl.siphash24_words(K0, K1, words[:16])  # warm up / compile
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        impl.siphash24_words(K0, K1, words)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    rng = np.random.default_rng(0)
    shapes = [
        ("boost mask, one step (L=2000)", 2_000, 200),
        ("detect one sequence (n=199)", 199, 500),
        ("corpus of 50 masks (1e5)", 100_000, 20),
        ("null calibration slab (4e6)", 4_000_000, 3),
    ]
    print(f"{'workload':36} {'numpy':>12} {'numba':>12} {'speedup':>8}")
    for label, size, repeats in shapes:
        words = rng.integers(0, 2**64, size=size, dtype=np.uint64)
        t_np = bench(_siphash_np, words, repeats)
        if _siphash_numba is None:
            print(f"{label:36} {size / t_np / 1e6:9.1f} M/s {'n/a':>12} {'n/a':>8}")
            continue
        t_nb = bench(_siphash_numba, words, repeats)
        print(
            f"{label:36} {size / t_np / 1e6:9.1f} M/s {size / t_nb / 1e6:9.1f} M/s "
            f"{t_np / t_nb:7.1f}x"
        )
    if _siphash_numba is not None:
        a = _siphash_np.siphash24_words(K0, K1, np.arange(10_000, dtype=np.uint64))
        b = _siphash_numba.siphash24_words(K0, K1, np.arange(10_000, dtype=np.uint64))
        print("backends bit-identical:", bool(np.array_equal(a, b)))


if __name__ == "__main__":
    main()
