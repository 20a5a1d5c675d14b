"""Logit boosting, categorical sampling, and the generation driver."""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from .embeddings import LinguisticVocab, VisionEmbeddings, WatermarkConfig
from .errors import DomainError, ValidationError, VismarkError
from .partition import (
    SENTINEL_PREV_TOKEN,
    PartitionState,
    build_partition,
    softmax,
    step_entropy,
)
from .saliency import RankedVocabulary, fuse_and_rank


@runtime_checkable
class LogitsSource(Protocol):
    """Anything that maps (context token ids, scene) to linguistic logits.

    Implementations must be deterministic given the context and their own
    internal seed, and must return one finite logit per linguistic token.
    """

    @property
    def vocab_size(self) -> int: ...

    def logits(self, context: Sequence[int], scene: VisionEmbeddings) -> np.ndarray: ...


@dataclass
class StepAudit:
    """Per-step trail: entropy, prefix fraction, and boosted-set membership."""

    h_norm: float
    eta: float
    sct: bool
    green: bool


@dataclass
class GenerationRecord:
    """Generated ids plus the audit trail needed to replay detection."""

    tokens: list[int]
    audit: list[StepAudit]
    fingerprint: str

    def to_json_dict(self) -> dict:
        return {
            "tokens": [int(t) for t in self.tokens],
            "audit": [
                {"h_norm": a.h_norm, "eta": a.eta, "sct": a.sct, "green": a.green}
                for a in self.audit
            ],
            "fingerprint": self.fingerprint,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "GenerationRecord":
        return cls(
            tokens=[int(t) for t in obj["tokens"]],
            audit=[
                StepAudit(
                    h_norm=float(a["h_norm"]),
                    eta=float(a["eta"]),
                    sct=bool(a["sct"]),
                    green=bool(a["green"]),
                )
                for a in obj.get("audit", [])
            ],
            fingerprint=str(obj.get("fingerprint", "")),
        )


def config_fingerprint(cfg: WatermarkConfig | None, vocab: LinguisticVocab) -> str:
    """Digest identifying the (config, vocabulary) pair behind a record."""
    h = hashlib.sha256(b"vismark-fp1")
    if cfg is None:
        h.update(b"plain")
    else:
        h.update(struct.pack("<dddd", cfg.alpha, cfg.gamma, cfg.delta, cfg.epsilon))
        h.update(hashlib.sha256(cfg.key).digest())
    h.update(vocab.content_digest())
    return h.hexdigest()[:16]


def adjust_distribution(
    logits: np.ndarray, part: PartitionState, delta: float
) -> np.ndarray:
    """Boost the boosted-set logits by delta and renormalize via softmax.

    delta == 0 returns softmax(logits) exactly; red-token probability
    ratios are preserved for any delta.
    """
    z = np.asarray(logits, dtype=np.float64).ravel()
    if z.shape[0] != part.ranked.size:
        raise DomainError(
            f"got {z.shape[0]} logits for a vocabulary of {part.ranked.size}"
        )
    if not np.isfinite(z).all():
        raise ValidationError("logits contain non-finite entries")
    if delta < 0.0:
        raise DomainError(f"delta={delta} must be >= 0")
    if delta == 0.0:
        return softmax(z)
    boosted = z + delta * part.boost_mask()
    return softmax(boosted)


def sample_token(dist: np.ndarray, rng: np.random.Generator) -> int:
    """Inverse-CDF categorical draw; returns the index into `dist`."""
    p = np.asarray(dist, dtype=np.float64).ravel()
    if np.any(p < 0.0):
        raise ValidationError("negative probability in sampling distribution")
    total = p.sum()
    if abs(total - 1.0) > 1e-6:
        raise ValidationError(f"distribution sums to {total}, not 1")
    cdf = np.cumsum(p)
    u = rng.random()
    idx = int(np.searchsorted(cdf, u, side="right"))
    return min(idx, len(p) - 1)


def _audit_flags(part: PartitionState, token_id: int) -> tuple[bool, bool]:
    sct = part.is_sct(token_id)
    green = (not sct) and part.is_green(token_id)
    return sct, green


def generate(
    source: LogitsSource,
    scene: VisionEmbeddings,
    vocab: LinguisticVocab,
    cfg: WatermarkConfig,
    length: int,
    rng: np.random.Generator,
    ranked: RankedVocabulary | None = None,
) -> GenerationRecord:
    """Watermarked autoregressive generation of `length` tokens.

    The saliency ranking is computed once per scene and reused at every
    step; each step re-derives the partition from the step entropy and
    the previously emitted token.
    """
    if length < 1:
        raise DomainError(f"length={length} must be >= 1")
    if source.vocab_size != vocab.size:
        raise VismarkError(
            f"logits source emits {source.vocab_size} entries, vocabulary has {vocab.size}"
        )
    if ranked is None:
        ranked = fuse_and_rank(vocab, scene)
    tokens: list[int] = []
    audit: list[StepAudit] = []
    prev = SENTINEL_PREV_TOKEN
    for step in range(length):
        try:
            z = source.logits(tokens, scene)
            info = step_entropy(z, cfg.epsilon)
            part = build_partition(ranked, info, cfg, prev)
            dist = adjust_distribution(z, part, cfg.delta)
            idx = sample_token(dist, rng)
        except VismarkError as exc:
            raise VismarkError(f"generation failed at position {step}: {exc}") from exc
        token_id = int(vocab.linguistic_ids[idx])
        sct, green = _audit_flags(part, token_id)
        tokens.append(token_id)
        audit.append(StepAudit(h_norm=info.h_norm, eta=part.eta_t, sct=sct, green=green))
        prev = token_id
    return GenerationRecord(
        tokens=tokens, audit=audit, fingerprint=config_fingerprint(cfg, vocab)
    )


def generate_unwatermarked(
    source: LogitsSource,
    scene: VisionEmbeddings,
    vocab: LinguisticVocab,
    length: int,
    rng: np.random.Generator,
    epsilon: float = 1e-8,
) -> GenerationRecord:
    """Plain sampling from the unmodified step distributions.

    Consumes the rng stream exactly like `generate`, so a delta=0
    watermarked run with the same seeds yields the same token sequence.
    """
    if length < 1:
        raise DomainError(f"length={length} must be >= 1")
    if source.vocab_size != vocab.size:
        raise VismarkError(
            f"logits source emits {source.vocab_size} entries, vocabulary has {vocab.size}"
        )
    tokens: list[int] = []
    audit: list[StepAudit] = []
    for step in range(length):
        try:
            z = source.logits(tokens, scene)
            info = step_entropy(z, epsilon)
            idx = sample_token(softmax(np.asarray(z, dtype=np.float64).ravel()), rng)
        except VismarkError as exc:
            raise VismarkError(f"generation failed at position {step}: {exc}") from exc
        tokens.append(int(vocab.linguistic_ids[idx]))
        audit.append(StepAudit(h_norm=info.h_norm, eta=0.0, sct=False, green=False))
    return GenerationRecord(
        tokens=tokens, audit=audit, fingerprint=config_fingerprint(None, vocab)
    )
