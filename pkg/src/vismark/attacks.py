"""Token-level attacks on generated sequences, plus external-text ingest."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .embeddings import LinguisticVocab
from .errors import DomainError, FormatError, ValidationError
from .partition import UNKNOWN_TOKEN_ID

ATTACK_KINDS = ("insert", "delete", "synonym", "noise", "wordvec")


@dataclass(frozen=True)
class AttackSpec:
    """One attack condition: edit kind, edited fraction, and rng seed."""

    kind: str
    rate: float
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ATTACK_KINDS:
            raise ValidationError(f"unknown attack kind {self.kind!r}")
        if not (0.0 <= self.rate <= 1.0):
            raise ValidationError(f"rate={self.rate} outside [0, 1]")

    def label(self) -> str:
        return f"{self.kind}@{self.rate:g}"


def nearest_synonym(token: int, vocab: LinguisticVocab) -> int:
    """Closest other linguistic token by embedding cosine (ties: lowest id)."""
    if vocab.size < 2:
        raise DomainError("need at least two linguistic tokens for a synonym")
    if not vocab.is_linguistic(token):
        raise DomainError(f"token {token} is not linguistic")
    row = vocab.row_of(token)
    emb = vocab.embeddings
    norms = np.linalg.norm(emb, axis=1)
    sims = (emb @ emb[row]) / (norms * norms[row])
    sims[row] = -np.inf  # never returns the input itself
    # argmax takes the first maximum; rows are ordered by ascending id
    return int(vocab.linguistic_ids[int(np.argmax(sims))])


def _edit_count(rate: float, length: int) -> int:
    # round half up, so a nominal 5% of 200 is always exactly 10
    return int(rate * length + 0.5)


def attack_edit(
    tokens, spec: AttackSpec, vocab: LinguisticVocab, rng: np.random.Generator
):
    """Apply `spec` to a token sequence; edits exactly round(rate*len) positions."""
    tokens = [int(t) for t in tokens]
    if not tokens:
        raise DomainError("cannot attack an empty sequence")
    k = _edit_count(spec.rate, len(tokens))
    if k == 0:
        return list(tokens)
    if spec.kind == "delete" and k > len(tokens):
        raise DomainError(f"cannot delete {k} of {len(tokens)} tokens")
    positions = np.sort(rng.choice(len(tokens), size=k, replace=False))

    if spec.kind == "delete":
        drop = set(int(p) for p in positions)
        return [t for i, t in enumerate(tokens) if i not in drop]

    if spec.kind == "insert":
        inserted = vocab.linguistic_ids[rng.integers(0, vocab.size, size=k)]
        out = []
        j = 0
        for i, t in enumerate(tokens):
            out.append(t)
            if j < k and i == positions[j]:
                out.append(int(inserted[j]))
                j += 1
        return out

    out = list(tokens)
    if spec.kind == "noise":
        replacements = vocab.linguistic_ids[rng.integers(0, vocab.size, size=k)]
        for p, r in zip(positions, replacements):
            out[int(p)] = int(r)
    else:  # synonym / wordvec: nearest neighbor in the shared embedding space
        for p in positions:
            out[int(p)] = nearest_synonym(out[int(p)], vocab)
    return out


def replace_positions_with_noise(
    tokens, positions, vocab: LinguisticVocab, rng: np.random.Generator
):
    """Replace the given positions with uniform random linguistic tokens."""
    out = [int(t) for t in tokens]
    replacements = vocab.linguistic_ids[rng.integers(0, vocab.size, size=len(positions))]
    for p, r in zip(positions, replacements):
        out[int(p)] = int(r)
    return out


def ingest_external_text(path, vocab: LinguisticVocab) -> list[int]:
    """Read an externally transformed sequence back into token ids.

    Accepts either a JSON list of ids or whitespace-separated surface
    tokens; surfaces missing from the decode table map to the reserved
    unknown id, which every detector treats as non-linguistic.
    """
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    if not text.strip():
        raise DomainError(f"{path}: empty input")
    try:
        parsed = json.loads(text)
    except json.JSONDecodeError:
        parsed = None
    if parsed is not None:
        if not isinstance(parsed, list) or not all(
            isinstance(x, int) and not isinstance(x, bool) for x in parsed
        ):
            raise FormatError(f"{path}: JSON input must be a list of token ids")
        if not parsed:
            raise DomainError(f"{path}: empty token list")
        return [int(x) for x in parsed]
    out = []
    for word in text.split():
        token = vocab.id_of_surface(word)
        out.append(UNKNOWN_TOKEN_ID if token is None else int(token))
    return out
