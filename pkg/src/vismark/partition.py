"""Per-step vocabulary partitioning: entropy, ratios, keyed membership.

Each generation step splits the linguistic vocabulary into three parts:
a deterministic prefix of the saliency ranking (size scales with how
peaked the step distribution is), a keyed pseudo-random green subset of
the remainder, and the red rest. Membership in the green subset is a
pure function of (key, previous token, candidate token), so generator
and detector reconstruct it independently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .embeddings import WatermarkConfig
from .errors import DomainError, ValidationError
from .saliency import RankedVocabulary

# PRF seed standing in for the non-existent predecessor of the first step.
SENTINEL_PREV_TOKEN = 0xFFFFFFFF

# Reserved id for surface tokens that cannot be resolved against the
# decode table; always treated as non-linguistic.
UNKNOWN_TOKEN_ID = 0xFFFFFFFE

_TWO64 = float(2**64)


@dataclass(frozen=True)
class EntropyInfo:
    """Step entropy in nats plus its normalization by the maximum ln L."""

    h_t: float
    h_norm: float


def softmax(logits: np.ndarray) -> np.ndarray:
    """Numerically safe softmax (max subtraction)."""
    z = np.asarray(logits, dtype=np.float64)
    e = np.exp(z - z.max())
    return e / e.sum()


def shannon_entropy(dist: np.ndarray) -> float:
    """Entropy in nats of a probability vector; 0 * log 0 counts as 0."""
    p = np.asarray(dist, dtype=np.float64)
    nz = p[p > 0.0]
    return float(-(nz * np.log(nz)).sum())


def step_entropy(logits: np.ndarray, epsilon: float = 1e-8) -> EntropyInfo:
    """Smoothed entropy of the step distribution over the linguistic vocab.

    The softmax probabilities are mixed with `epsilon` and renormalized
    by (1 + L*epsilon), which keeps the vector stochastic and bounds the
    entropy by ln L exactly (attained at the uniform distribution).
    """
    z = np.asarray(logits, dtype=np.float64).ravel()
    length = z.shape[0]
    if length < 2:
        raise DomainError(f"step entropy needs at least 2 logits, got {length}")
    if not np.isfinite(z).all():
        raise ValidationError("logits contain non-finite entries")
    if epsilon <= 0.0:
        raise DomainError("epsilon must be > 0")
    p_hat = (softmax(z) + epsilon) / (1.0 + length * epsilon)
    h_max = math.log(length)
    h_t = min(shannon_entropy(p_hat), h_max)
    return EntropyInfo(h_t=h_t, h_norm=h_t / h_max)


def partition_ratios(h_norm: float, cfg: WatermarkConfig) -> tuple[float, float]:
    """Split the boosted fraction between the saliency prefix and green draw.

    Low entropy grows the deterministic prefix (up to alpha); the keyed
    green fraction takes whatever remains of gamma.
    """
    if not (0.0 <= h_norm <= 1.0):
        raise DomainError(f"h_norm={h_norm} outside [0, 1]")
    eta_t = cfg.alpha * (1.0 - h_norm)
    return eta_t, cfg.gamma - eta_t


def _pack_words(prev_token, candidates: np.ndarray) -> np.ndarray:
    """Little-endian-concatenate (prev, candidate) u32 pairs into u64 words."""
    cand = np.ascontiguousarray(candidates, dtype=np.uint64)
    prev = np.asarray(prev_token, dtype=np.uint64)
    return prev | (cand << np.uint64(32))


def green_units(key: bytes, prev_token, candidates) -> np.ndarray:
    """Keyed uniform variates in [0, 1) for (prev, candidate) pairs.

    `prev_token` may be a scalar or an array aligned with `candidates`.
    """
    k0 = int.from_bytes(key[:8], "little")
    k1 = int.from_bytes(key[8:16], "little")
    words = _pack_words(prev_token, np.atleast_1d(np.asarray(candidates)))
    hashes = _kernels.siphash24_words(k0, k1, words)
    return hashes.astype(np.float64) / _TWO64


def green_mask(key: bytes, prev_token, candidates, threshold: float) -> np.ndarray:
    """Vector green-membership test: PRF unit variate < threshold."""
    return green_units(key, prev_token, candidates) < threshold


def green_test(key: bytes, prev_token: int, candidate: int, threshold: float) -> bool:
    """Scalar green-membership test shared by generator and detector."""
    return bool(green_mask(key, prev_token, np.asarray([candidate]), threshold)[0])


@dataclass(frozen=True)
class PartitionState:
    """One step's vocabulary split, reconstructible from (key, prev token).

    `sct_count` entries of the ranking form the deterministic boosted
    prefix; every other linguistic token is green iff its PRF variate
    falls below `green_threshold`. eta_t + gamma_t equals the configured
    gamma exactly.
    """

    eta_t: float
    gamma_t: float
    sct_count: int
    green_threshold: float
    prev_token: int
    key: bytes
    ranked: RankedVocabulary
    sct_ids: frozenset = field(repr=False)

    def is_sct(self, token_id: int) -> bool:
        return int(token_id) in self.sct_ids

    def is_green(self, token_id: int) -> bool:
        """True for non-prefix linguistic tokens passing the keyed test."""
        if self.is_sct(token_id) or not self.ranked.vocab.is_linguistic(token_id):
            return False
        return green_test(self.key, self.prev_token, token_id, self.green_threshold)

    def boost_mask(self) -> np.ndarray:
        """Boolean mask over linguistic rows: prefix plus green members."""
        vocab = self.ranked.vocab
        mask = green_mask(
            self.key, self.prev_token, vocab.linguistic_ids, self.green_threshold
        )
        if self.sct_count:
            mask[self.ranked.order[: self.sct_count]] = True
        return mask


def build_partition(
    ranked: RankedVocabulary,
    info: EntropyInfo,
    cfg: WatermarkConfig,
    prev_token: int,
) -> PartitionState:
    """Construct the step partition for the given entropy and PRF seed."""
    eta_t, gamma_t = partition_ratios(info.h_norm, cfg)
    size = ranked.size
    sct_count = int(math.floor(eta_t * size))
    # Rescale the green fraction to the non-prefix remainder so that the
    # expected total boosted mass stays exactly gamma.
    threshold = gamma_t / (1.0 - eta_t)
    sct_ids = frozenset(int(t) for t in ranked.top_token_ids(sct_count))
    return PartitionState(
        eta_t=eta_t,
        gamma_t=gamma_t,
        sct_count=sct_count,
        green_threshold=threshold,
        prev_token=int(prev_token),
        key=cfg.key,
        ranked=ranked,
        sct_ids=sct_ids,
    )
