"""Visual-saliency scoring and ranking of the linguistic vocabulary.

Three complementary views of how strongly a token is grounded in the
visual scene:

* localized patch affinity (`lpa`): best cosine match against any single
  patch, which favors tokens tied to one region;
* global scene coherence (`gsc`): cosine against the CLS summary vector,
  which favors scene-level tokens;
* cross-modal contextual salience (`ccs`): cosine against all patches,
  averaged under attention weights given by a softmax over the raw
  patch-token dot products.

Each metric is min-max normalized across the vocabulary, the three are
summed into a fused score, and the vocabulary is sorted by that score
(descending, ties broken by ascending token id).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embeddings import LinguisticVocab, VisionEmbeddings, cosine
from .errors import DomainError, ValidationError


@dataclass
class SaliencyScores:
    """Raw, normalized, and fused per-token saliency values."""

    lpa: np.ndarray
    gsc: np.ndarray
    ccs: np.ndarray
    lpa_n: np.ndarray
    gsc_n: np.ndarray
    ccs_n: np.ndarray
    phi: np.ndarray


@dataclass
class RankedVocabulary:
    """Linguistic vocabulary sorted by fused saliency.

    `order[i]` is the linguistic row index of the i-th most salient
    token; `phi` stays in vocabulary order.
    """

    order: np.ndarray
    phi: np.ndarray
    scores: SaliencyScores
    vocab: LinguisticVocab

    @property
    def size(self) -> int:
        return len(self.order)

    def top_token_ids(self, count: int) -> np.ndarray:
        """Token ids of the `count` most salient entries."""
        return self.vocab.linguistic_ids[self.order[:count]]


def _check_token_vector(h_l: np.ndarray, dim: int) -> np.ndarray:
    h_l = np.asarray(h_l, dtype=np.float64).ravel()
    if h_l.shape[0] != dim:
        raise DomainError(f"token vector has dimension {h_l.shape[0]}, scene has {dim}")
    if np.linalg.norm(h_l) == 0.0:
        raise DomainError("zero token embedding")
    return h_l


def lpa(scene: VisionEmbeddings, h_l: np.ndarray) -> float:
    """Localized patch affinity: max cosine over patches (CLS excluded)."""
    h_l = _check_token_vector(h_l, scene.dim)
    return max(cosine(p, h_l) for p in scene.patches)


def gsc(scene: VisionEmbeddings, h_l: np.ndarray) -> float:
    """Global scene coherence: cosine against the CLS vector."""
    h_l = _check_token_vector(h_l, scene.dim)
    return cosine(scene.cls, h_l)


def ccs(scene: VisionEmbeddings, h_l: np.ndarray) -> float:
    """Cross-modal contextual salience: attention-weighted patch cosines.

    Attention logits are the raw patch-token dot products (softmax with
    max subtraction, so overflow cannot occur); the attended values are
    the patch cosines. CLS is excluded.
    """
    h_l = _check_token_vector(h_l, scene.dim)
    dots = scene.patches @ h_l
    w = np.exp(dots - dots.max())
    w /= w.sum()
    cosines = np.array([cosine(p, h_l) for p in scene.patches])
    return float(np.dot(w, cosines))


def normalize_metric(raw: np.ndarray) -> np.ndarray:
    """Min-max normalize into [0, 1]; a constant array maps to all zeros."""
    raw = np.asarray(raw, dtype=np.float64).ravel()
    if len(raw) < 1:
        raise DomainError("cannot normalize an empty score array")
    if not np.isfinite(raw).all():
        raise ValidationError("scores contain non-finite entries")
    lo = raw.min()
    hi = raw.max()
    if hi == lo:
        return np.zeros_like(raw)
    return (raw - lo) / (hi - lo)


def compute_scores(vocab: LinguisticVocab, scene: VisionEmbeddings) -> SaliencyScores:
    """All three metrics for every linguistic token, vectorized."""
    if vocab.dim != scene.dim:
        raise DomainError(
            f"vocabulary dimension {vocab.dim} does not match scene dimension {scene.dim}"
        )
    tokens = vocab.embeddings  # (L, d), validated nonzero rows
    patches = scene.patches  # (P, d), validated nonzero rows

    tok_n = tokens / np.linalg.norm(tokens, axis=1, keepdims=True)
    pat_n = patches / np.linalg.norm(patches, axis=1, keepdims=True)
    cls_n = scene.cls / np.linalg.norm(scene.cls)

    cos = np.clip(tok_n @ pat_n.T, -1.0, 1.0)  # (L, P)
    lpa_raw = cos.max(axis=1)
    gsc_raw = np.clip(tok_n @ cls_n, -1.0, 1.0)

    dots = tokens @ patches.T  # raw attention logits
    w = np.exp(dots - dots.max(axis=1, keepdims=True))
    w /= w.sum(axis=1, keepdims=True)
    ccs_raw = (w * cos).sum(axis=1)

    lpa_n = normalize_metric(lpa_raw)
    gsc_n = normalize_metric(gsc_raw)
    ccs_n = normalize_metric(ccs_raw)
    return SaliencyScores(
        lpa=lpa_raw,
        gsc=gsc_raw,
        ccs=ccs_raw,
        lpa_n=lpa_n,
        gsc_n=gsc_n,
        ccs_n=ccs_n,
        phi=lpa_n + gsc_n + ccs_n,
    )


def fuse_and_rank(vocab: LinguisticVocab, scene: VisionEmbeddings) -> RankedVocabulary:
    """Score every linguistic token and sort by fused saliency.

    Sort is descending in the fused score with ties broken by ascending
    token id, which makes the ordering reproducible across platforms.
    """
    scores = compute_scores(vocab, scene)
    # lexsort: primary key last; ascending -phi == descending phi, with
    # the ascending row index (== ascending id) breaking ties.
    order = np.lexsort((np.arange(vocab.size), -scores.phi))
    return RankedVocabulary(order=order, phi=scores.phi, scores=scores, vocab=vocab)
