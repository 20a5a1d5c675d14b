"""Backend dispatch for the keyed-hash hot kernel.

Green-list membership is decided by a SipHash-2-4 evaluation per
(previous token, candidate) pair, which at generation time runs once per
candidate per step and dominates everything except the logits matmul.
Two interchangeable implementations exist:

* a numba ``@njit`` scalar loop (default when numba imports cleanly),
* a vectorized pure-numpy path.

``VISMARK_BACKEND=numpy`` or ``VISMARK_BACKEND=numba`` in the environment
pins the choice at import time. Both backends are exact integer code and
produce bit-identical hashes; ``benchmarks/bench_kernels.py`` compares
their throughput.
"""

import os

import numpy as np

from . import _siphash_np

_requested = os.environ.get("VISMARK_BACKEND", "").strip().lower()
if _requested not in ("", "numpy", "numba"):
    raise RuntimeError(
        f"VISMARK_BACKEND={_requested!r} not recognized (expected 'numpy' or 'numba')"
    )

if _requested == "numpy":
    _impl = _siphash_np
else:
    try:
        from . import _siphash_numba as _impl
    except ImportError:
        if _requested == "numba":
            raise
        _impl = _siphash_np

BACKEND = "numpy" if _impl is _siphash_np else "numba"


def siphash24_words(k0: int, k1: int, words) -> np.ndarray:
    """Hash little-endian-packed 8-byte messages with the active backend."""
    words = np.ascontiguousarray(words, dtype=np.uint64)
    return _impl.siphash24_words(np.uint64(k0), np.uint64(k1), words)
