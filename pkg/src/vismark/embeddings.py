"""Embedding carriers, the EMB1 binary format, and the cosine kernel.

The shared d-dimensional space holds three kinds of rows: projected
vision patches plus their CLS summary, the full token-embedding table,
and its linguistic restriction (tokens that carry at least one letter
and no digit). Everything downstream consumes these types.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateVocabularyError,
    DomainError,
    FormatError,
    ShapeError,
    TruncatedFileError,
    ValidationError,
)

EMB1_MAGIC = b"EMB1"

# Strippable word-boundary markers: sentencepiece low block, GPT-2 BPE
# space marker, plain leading space.
_BOUNDARY_MARKERS = ("▁", "Ġ", " ")


def _require_matrix(m: np.ndarray, what: str) -> np.ndarray:
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise ShapeError(f"{what} must be a 2-D matrix with positive shape, got {m.shape}")
    if not np.isfinite(m).all():
        raise ValidationError(f"{what} contains non-finite entries")
    return m


def write_embedding_matrix(matrix: np.ndarray, path) -> None:
    """Write a matrix as EMB1: magic, u32 rows, u32 cols, f32 row-major (all LE)."""
    m = _require_matrix(matrix, "embedding matrix")
    data = np.ascontiguousarray(m, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(EMB1_MAGIC)
        fh.write(struct.pack("<II", m.shape[0], m.shape[1]))
        fh.write(data.tobytes(order="C"))


def read_embedding_matrix(path) -> np.ndarray:
    """Read an EMB1 file back into a float32 matrix."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 4 or blob[:4] != EMB1_MAGIC:
        raise FormatError(f"{path}: bad magic {blob[:4]!r}, expected {EMB1_MAGIC!r}")
    if len(blob) < 12:
        raise TruncatedFileError(f"{path}: header truncated ({len(blob)} bytes)")
    rows, cols = struct.unpack("<II", blob[4:12])
    if rows < 1 or cols < 1:
        raise FormatError(f"{path}: degenerate shape {rows}x{cols}")
    need = 12 + 4 * rows * cols
    if len(blob) < need:
        raise TruncatedFileError(f"{path}: payload truncated ({len(blob)} < {need} bytes)")
    if len(blob) > need:
        raise FormatError(f"{path}: {len(blob) - need} trailing bytes after payload")
    m = np.frombuffer(blob, dtype="<f4", count=rows * cols, offset=12).reshape(rows, cols)
    if not np.isfinite(m).all():
        raise ValidationError(f"{path}: non-finite embedding entries")
    return m.copy()


def load_decode_table(path) -> dict[int, str]:
    """Load a decode table stored as a JSON object {id-string: token-string}."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise FormatError(f"{path}: decode table must be a JSON object")
    return {int(k): str(v) for k, v in raw.items()}


@dataclass
class VisionEmbeddings:
    """Projected visual scene: P patch vectors plus one CLS summary vector."""

    patches: np.ndarray  # (P, d)
    cls: np.ndarray  # (d,)

    def __post_init__(self):
        patches = np.array(self.patches, dtype=np.float64)
        cls = np.array(self.cls, dtype=np.float64)
        if patches.ndim != 2 or patches.shape[0] < 1:
            raise ShapeError(f"patches must be (P, d) with P >= 1, got {patches.shape}")
        if cls.ndim != 1 or cls.shape[0] != patches.shape[1]:
            raise ShapeError(
                f"cls dimension {cls.shape} does not match patches {patches.shape}"
            )
        if not (np.isfinite(patches).all() and np.isfinite(cls).all()):
            raise ValidationError("vision embeddings contain non-finite entries")
        norms = np.linalg.norm(patches, axis=1)
        if np.any(norms == 0.0) or np.linalg.norm(cls) == 0.0:
            raise ValidationError("vision embeddings contain a zero row")
        patches.setflags(write=False)
        cls.setflags(write=False)
        self.patches = patches
        self.cls = cls

    @property
    def num_patches(self) -> int:
        return self.patches.shape[0]

    @property
    def dim(self) -> int:
        return self.patches.shape[1]


@dataclass
class LinguisticVocab:
    """Linguistic restriction of a token vocabulary.

    `linguistic_ids` is strictly increasing and `embeddings` holds one row
    per retained id, in the same order. `decode_table` covers the full
    vocabulary and is also used for reverse (surface -> id) lookup.
    """

    full_size: int
    linguistic_ids: np.ndarray  # (L,) int64, strictly increasing
    embeddings: np.ndarray  # (L, d)
    decode_table: dict[int, str]
    _row_of_id: dict[int, int] = field(init=False, repr=False)
    _surface_to_id: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        ids = np.array(self.linguistic_ids, dtype=np.int64)
        emb = np.array(self.embeddings, dtype=np.float64)
        if ids.ndim != 1 or len(ids) == 0:
            raise DegenerateVocabularyError("no linguistic ids")
        if np.any(np.diff(ids) <= 0):
            raise ValidationError("linguistic ids must be strictly increasing")
        if len(ids) > self.full_size or ids[-1] >= self.full_size or ids[0] < 0:
            raise ValidationError("linguistic ids must lie within the full vocabulary")
        if emb.shape[0] != len(ids):
            raise ShapeError(
                f"{emb.shape[0]} embedding rows for {len(ids)} linguistic ids"
            )
        if not np.isfinite(emb).all():
            raise ValidationError("linguistic embeddings contain non-finite entries")
        if np.any(np.linalg.norm(emb, axis=1) == 0.0):
            raise ValidationError("a linguistic id maps to a zero embedding row")
        ids.setflags(write=False)
        emb.setflags(write=False)
        self.linguistic_ids = ids
        self.embeddings = emb
        self._row_of_id = {int(t): i for i, t in enumerate(ids)}
        # first id wins when two ids share a surface string
        surf: dict[str, int] = {}
        for t, s in sorted(self.decode_table.items()):
            surf.setdefault(s, t)
        self._surface_to_id = surf

    @property
    def size(self) -> int:
        """Number of linguistic tokens (L)."""
        return len(self.linguistic_ids)

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]

    def is_linguistic(self, token_id: int) -> bool:
        return int(token_id) in self._row_of_id

    def row_of(self, token_id: int) -> int:
        """Row index of a linguistic token id in `embeddings`."""
        return self._row_of_id[int(token_id)]

    def id_of_surface(self, surface: str) -> int | None:
        return self._surface_to_id.get(surface)

    def content_digest(self) -> bytes:
        """Digest over ids and embedding bytes; identifies this vocabulary."""
        h = hashlib.sha256()
        h.update(struct.pack("<Q", self.full_size))
        h.update(self.linguistic_ids.tobytes())
        h.update(self.embeddings.tobytes())
        return h.digest()


def is_linguistic_surface(surface: str) -> bool:
    """True if the surface form has at least one letter and no digit.

    A single leading word-boundary marker is ignored before the check.
    """
    if surface and surface.startswith(_BOUNDARY_MARKERS):
        surface = surface[1:]
    return any(c.isalpha() for c in surface) and not any(c.isdigit() for c in surface)


def filter_linguistic(decode_table: dict[int, str], embeddings: np.ndarray) -> LinguisticVocab:
    """Restrict a full vocabulary to its linguistic tokens.

    Ids absent from the decode table are treated as non-linguistic. The
    retained ids keep their original order.
    """
    emb = _require_matrix(embeddings, "vocabulary embeddings")
    full_size = emb.shape[0]
    kept = [
        i
        for i in range(full_size)
        if i in decode_table and is_linguistic_surface(decode_table[i])
    ]
    if not kept:
        raise DegenerateVocabularyError("linguistic filter retained no tokens")
    rows = emb[np.asarray(kept, dtype=np.int64)]
    return LinguisticVocab(
        full_size=full_size,
        linguistic_ids=np.asarray(kept, dtype=np.int64),
        embeddings=rows,
        decode_table=dict(decode_table),
    )


def project_vision(raw: np.ndarray, proj: np.ndarray) -> VisionEmbeddings:
    """Project raw (P+1) x d_v vision features into the shared d-space.

    Row 0 of `raw` is the CLS row; the remaining rows are patches.
    """
    raw = _require_matrix(raw, "raw vision features")
    proj = _require_matrix(proj, "projection matrix")
    if raw.shape[0] < 2:
        raise ShapeError("raw vision features need a CLS row plus at least one patch")
    if raw.shape[1] != proj.shape[0]:
        raise ShapeError(
            f"inner dimensions disagree: raw is {raw.shape}, projection is {proj.shape}"
        )
    out = np.asarray(raw, dtype=np.float64) @ np.asarray(proj, dtype=np.float64)
    if np.any(np.linalg.norm(out, axis=1) == 0.0):
        raise ValidationError("projection produced a zero row")
    return VisionEmbeddings(patches=out[1:], cls=out[0])


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity, clamped to [-1, 1] against rounding."""
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    if u.shape != v.shape:
        raise ShapeError(f"vector lengths disagree: {u.shape} vs {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise DomainError("cosine of a zero vector is undefined")
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


@dataclass(frozen=True)
class WatermarkConfig:
    """Watermark hyper-parameters plus the 128-bit secret key.

    `alpha` caps the share of the vocabulary reserved for the top-saliency
    prefix; `gamma` is the total boosted fraction; `delta` the logit boost;
    `epsilon` the entropy smoothing constant.
    """

    key: bytes
    alpha: float = 0.025
    gamma: float = 0.5
    delta: float = 2.0
    epsilon: float = 1e-8

    def __post_init__(self):
        if not isinstance(self.key, (bytes, bytearray)) or len(self.key) != 16:
            raise ValidationError("key must be exactly 16 bytes (128 bits)")
        if not (0.01 <= self.alpha <= 0.1):
            raise ValidationError(f"alpha={self.alpha} outside [0.01, 0.1]")
        if not (self.alpha <= self.gamma < 1.0):
            raise ValidationError(f"gamma={self.gamma} outside [alpha, 1)")
        # delta == 0 is allowed: it disables the boost and is the control
        # arm of every neutrality experiment.
        if self.delta < 0.0:
            raise ValidationError(f"delta={self.delta} must be >= 0")
        if self.epsilon <= 0.0:
            raise ValidationError(f"epsilon={self.epsilon} must be > 0")
        object.__setattr__(self, "key", bytes(self.key))

    @classmethod
    def from_hex_key(cls, key_hex: str, **kwargs) -> "WatermarkConfig":
        key_hex = key_hex.strip()
        if len(key_hex) != 32:
            raise ValidationError("key must be a 32-hex-char string")
        try:
            key = bytes.fromhex(key_hex)
        except ValueError as exc:
            raise ValidationError(f"bad hex key: {exc}") from exc
        return cls(key=key, **kwargs)

    @property
    def k0(self) -> int:
        """Low 8 key bytes as a little-endian uint64."""
        return struct.unpack("<Q", self.key[:8])[0]

    @property
    def k1(self) -> int:
        """High 8 key bytes as a little-endian uint64."""
        return struct.unpack("<Q", self.key[8:])[0]

    def key_fingerprint(self) -> str:
        """Short digest of the key, safe to echo in logs and reports."""
        return hashlib.sha256(b"vismark-key" + self.key).hexdigest()[:16]
