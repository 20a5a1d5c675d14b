"""Statistical watermark detection and ROC/AUC scoring.

Two modes. Model-free detection needs only the key: each linguistic
token is tested against the keyed PRF at the full boosted fraction
gamma, which upper-bounds every per-step green threshold, so all
green-sampled tokens count as hits and prefix tokens hit at the chance
rate gamma. Full-replay detection re-runs the logits source over the
token prefix and reconstructs each step's partition exactly as the
generator built it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .embeddings import LinguisticVocab, VisionEmbeddings, WatermarkConfig
from .errors import ConfigError, DomainError, InsufficientDataError
from .partition import (
    SENTINEL_PREV_TOKEN,
    build_partition,
    green_test,
    green_units,
    step_entropy,
)
from .saliency import RankedVocabulary, fuse_and_rank
from .watermark import LogitsSource

MIN_COUNTABLE_POSITIONS = 16
DEFAULT_THRESHOLD_Z = 4.0


@dataclass
class DetectionReport:
    """Outcome of a green-hit proportion test on one token sequence."""

    mode: str  # "model_free" | "full_replay"
    n_counted: int
    green_hits: int
    z: float
    p_value: float
    threshold_z: float
    verdict: bool

    def to_json_dict(self) -> dict:
        return {
            "mode": self.mode,
            "n": self.n_counted,
            "hits": self.green_hits,
            "z": self.z,
            "p": self.p_value,
            "threshold_z": self.threshold_z,
            "verdict": self.verdict,
        }


def z_score(x: int, n: int, gamma: float) -> float:
    """Standard score of x green hits among n trials at null rate gamma."""
    if n < 1:
        raise InsufficientDataError("z-score needs at least one counted position", 0)
    if not (0.0 < gamma < 1.0):
        raise DomainError(f"gamma={gamma} outside (0, 1)")
    return (x - gamma * n) / math.sqrt(n * gamma * (1.0 - gamma))


def _normal_tail(z: float) -> float:
    """One-sided upper tail of the standard normal."""
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def _finish(mode: str, hits: int, n: int, gamma: float, threshold_z: float) -> DetectionReport:
    z = z_score(hits, n, gamma)
    return DetectionReport(
        mode=mode,
        n_counted=n,
        green_hits=hits,
        z=z,
        p_value=_normal_tail(z),
        threshold_z=threshold_z,
        verdict=z > threshold_z,
    )


def detect_model_free(
    tokens,
    key: bytes,
    gamma: float,
    vocab: LinguisticVocab,
    threshold_z: float = DEFAULT_THRESHOLD_Z,
) -> DetectionReport:
    """Key-only detection from the token sequence alone.

    Counts position t >= 1 iff tokens[t] is linguistic; the hit test is
    the keyed PRF at threshold gamma, seeded by tokens[t-1]. Raises
    InsufficientDataError when fewer than 16 positions are countable.
    """
    tokens = [int(t) for t in tokens]
    countable = [t for t in range(1, len(tokens)) if vocab.is_linguistic(tokens[t])]
    n = len(countable)
    if n < MIN_COUNTABLE_POSITIONS:
        raise InsufficientDataError(
            f"only {n} countable positions (need {MIN_COUNTABLE_POSITIONS})", n
        )
    prevs = np.asarray([tokens[t - 1] for t in countable], dtype=np.uint64)
    cands = np.asarray([tokens[t] for t in countable], dtype=np.uint64)
    hits = int((green_units(key, prevs, cands) < gamma).sum())
    return _finish("model_free", hits, n, gamma, threshold_z)


def detect_full_replay(
    tokens,
    source: LogitsSource,
    scene: VisionEmbeddings,
    vocab: LinguisticVocab,
    cfg: WatermarkConfig,
    threshold_z: float = DEFAULT_THRESHOLD_Z,
    ranked: RankedVocabulary | None = None,
) -> DetectionReport:
    """Detection by replaying the source over the given token prefix.

    Each position's partition is rebuilt exactly as the generator built
    it, so a hit is membership in the step's prefix-or-green set at the
    step threshold. Requires the same source, scene, key, and config
    that generated the sequence.
    """
    if source.vocab_size != vocab.size:
        raise ConfigError(
            f"logits source emits {source.vocab_size} entries, vocabulary has {vocab.size}"
        )
    if ranked is None:
        ranked = fuse_and_rank(vocab, scene)
    tokens = [int(t) for t in tokens]
    hits = 0
    n = 0
    prev = SENTINEL_PREV_TOKEN
    for t, token in enumerate(tokens):
        if vocab.is_linguistic(token):
            z = source.logits(tokens[:t], scene)
            info = step_entropy(z, cfg.epsilon)
            part = build_partition(ranked, info, cfg, prev)
            n += 1
            if part.is_sct(token) or green_test(cfg.key, prev, token, part.green_threshold):
                hits += 1
        prev = token
    if n < 1:
        raise InsufficientDataError("no countable (linguistic) positions", n)
    return _finish("full_replay", hits, n, cfg.gamma, threshold_z)


def replay_hit_flags(
    tokens,
    source: LogitsSource,
    scene: VisionEmbeddings,
    vocab: LinguisticVocab,
    cfg: WatermarkConfig,
    ranked: RankedVocabulary | None = None,
) -> list[bool]:
    """Per-position boosted-set membership under full replay.

    On an untampered generation this reproduces the recorded audit flags
    (sct or green) bit-exactly.
    """
    if ranked is None:
        ranked = fuse_and_rank(vocab, scene)
    tokens = [int(t) for t in tokens]
    flags: list[bool] = []
    prev = SENTINEL_PREV_TOKEN
    for t, token in enumerate(tokens):
        if vocab.is_linguistic(token):
            z = source.logits(tokens[:t], scene)
            info = step_entropy(z, cfg.epsilon)
            part = build_partition(ranked, info, cfg, prev)
            flags.append(
                part.is_sct(token)
                or green_test(cfg.key, prev, token, part.green_threshold)
            )
        else:
            flags.append(False)
        prev = token
    return flags


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties averaged (midrank method)."""
    sorter = np.argsort(values, kind="mergesort")
    inv = np.empty_like(sorter)
    inv[sorter] = np.arange(len(values))
    ordered = values[sorter]
    is_group_start = np.r_[True, ordered[1:] != ordered[:-1]]
    group_of = np.cumsum(is_group_start)[inv]
    boundaries = np.r_[np.nonzero(is_group_start)[0], len(values)]
    return 0.5 * (boundaries[group_of] + boundaries[group_of - 1] + 1)


def auc(pos_scores, neg_scores) -> float:
    """Mann-Whitney AUC of positives over negatives; ties count one half."""
    pos = np.asarray(pos_scores, dtype=np.float64).ravel()
    neg = np.asarray(neg_scores, dtype=np.float64).ravel()
    if len(pos) == 0 or len(neg) == 0:
        raise DomainError("AUC needs at least one score on each side")
    ranks = _average_ranks(np.concatenate([pos, neg]))
    u = ranks[: len(pos)].sum() - len(pos) * (len(pos) + 1) / 2.0
    return float(u / (len(pos) * len(neg)))
