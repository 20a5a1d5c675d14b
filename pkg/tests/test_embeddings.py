"""EMB1 format, linguistic filter, projection, cosine."""

import struct

import numpy as np
import pytest

from vismark.embeddings import (
    EMB1_MAGIC,
    WatermarkConfig,
    cosine,
    filter_linguistic,
    is_linguistic_surface,
    project_vision,
    read_embedding_matrix,
    write_embedding_matrix,
)
from vismark.errors import (
    DegenerateVocabularyError,
    DomainError,
    FormatError,
    ShapeError,
    TruncatedFileError,
    ValidationError,
)

from conftest import random_orthogonal


# --- EMB1 ---------------------------------------------------------------


def test_emb1_identity_roundtrip(tmp_path):
    p = tmp_path / "id.emb"
    write_embedding_matrix(np.eye(2, dtype=np.float32), p)
    m = read_embedding_matrix(p)
    assert np.array_equal(m, np.eye(2, dtype=np.float32))


def test_emb1_random_roundtrip_bit_exact(tmp_path):
    rng = np.random.default_rng(3)
    m = rng.standard_normal((16, 8)).astype(np.float32)
    p = tmp_path / "r.emb"
    write_embedding_matrix(m, p)
    back = read_embedding_matrix(p)
    assert back.dtype == np.float32
    assert m.tobytes() == back.tobytes()


def test_emb1_file_sizes(tmp_path):
    # header is 4 magic + 4 rows + 4 cols; payload is 4 bytes per entry
    p1 = tmp_path / "one.emb"
    write_embedding_matrix(np.zeros((1, 1)), p1)
    assert p1.stat().st_size == 16
    p2 = tmp_path / "six.emb"
    write_embedding_matrix(np.ones((2, 3)), p2)
    assert p2.stat().st_size == 36


def test_emb1_bad_magic(tmp_path):
    p = tmp_path / "bad.emb"
    p.write_bytes(b"XEM1" + struct.pack("<II", 1, 1) + b"\x00" * 4)
    with pytest.raises(FormatError):
        read_embedding_matrix(p)


def test_emb1_truncated_payload(tmp_path):
    p = tmp_path / "short.emb"
    p.write_bytes(EMB1_MAGIC + struct.pack("<II", 2, 2) + b"\x00" * 7)
    with pytest.raises(TruncatedFileError):
        read_embedding_matrix(p)


def test_emb1_trailing_garbage(tmp_path):
    p = tmp_path / "long.emb"
    p.write_bytes(EMB1_MAGIC + struct.pack("<II", 1, 1) + b"\x00" * 4 + b"xx")
    with pytest.raises(FormatError):
        read_embedding_matrix(p)


def test_emb1_nonfinite_rejected(tmp_path):
    p = tmp_path / "nan.emb"
    payload = struct.pack("<f", float("nan"))
    p.write_bytes(EMB1_MAGIC + struct.pack("<II", 1, 1) + payload)
    with pytest.raises(ValidationError):
        read_embedding_matrix(p)
    with pytest.raises(ValidationError):
        write_embedding_matrix(np.array([[np.inf]]), tmp_path / "inf.emb")


def test_emb1_unwritable_path():
    with pytest.raises(OSError):
        write_embedding_matrix(np.eye(2), "/nonexistent-dir/x.emb")


# --- linguistic filter ---------------------------------------------------


def test_filter_keeps_only_wordlike():
    emb = np.arange(6, dtype=np.float64).reshape(3, 2) + 1.0
    vocab = filter_linguistic({0: "dog", 1: "42", 2: "!!"}, emb)
    assert vocab.linguistic_ids.tolist() == [0]


def test_filter_excludes_digit_mixes():
    emb = np.ones((2, 2))
    vocab = filter_linguistic({0: "cat", 1: "cat2"}, emb)
    assert vocab.linguistic_ids.tolist() == [0]


def test_filter_strips_one_boundary_marker():
    for surface in ("▁cat", "Ġcat", " cat"):
        assert is_linguistic_surface(surface)
    # marker alone is not a word
    assert not is_linguistic_surface("▁")
    assert not is_linguistic_surface("▁42")


def test_filter_all_alphabetic_retains_everything():
    emb = np.random.default_rng(0).standard_normal((10, 3))
    table = {i: "w" + "abcdefghij"[i] for i in range(10)}
    vocab = filter_linguistic(table, emb)
    assert vocab.size == vocab.full_size == 10


def test_filter_empty_retained_set():
    with pytest.raises(DegenerateVocabularyError):
        filter_linguistic({0: "42", 1: "!!"}, np.ones((2, 2)))


def test_filter_is_idempotent_and_order_preserving():
    rng = np.random.default_rng(1)
    table = {0: "up", 1: "9", 2: "down", 3: "%", 4: "left"}
    vocab = filter_linguistic(table, rng.standard_normal((5, 4)))
    assert vocab.linguistic_ids.tolist() == [0, 2, 4]
    # every retained surface still passes the rule
    assert all(is_linguistic_surface(table[i]) for i in vocab.linguistic_ids)


def test_filter_zero_row_for_linguistic_id_rejected():
    emb = np.ones((2, 3))
    emb[1] = 0.0
    with pytest.raises(ValidationError):
        filter_linguistic({0: "cat", 1: "dog"}, emb)


# --- projection ----------------------------------------------------------


def test_project_identity():
    raw = np.random.default_rng(2).standard_normal((4, 3))
    out = project_vision(raw, np.eye(3))
    assert np.allclose(out.cls, raw[0])
    assert np.allclose(out.patches, raw[1:])


def test_project_hand_example():
    out = project_vision(np.array([[1.0, 0.0], [0.0, 1.0]]), np.array([[2.0, 0.0], [0.0, 3.0]]))
    assert np.allclose(out.cls, [2.0, 0.0])
    assert np.allclose(out.patches, [[0.0, 3.0]])


def test_project_shape_mismatch():
    with pytest.raises(ShapeError):
        project_vision(np.ones((2, 3)), np.ones((4, 2)))


def test_project_zero_output_row():
    raw = np.array([[1.0, 0.0], [0.0, 1.0]])
    proj = np.array([[1.0, 0.0], [0.0, 0.0]])  # kills the second row
    with pytest.raises(ValidationError):
        project_vision(raw, proj)


# --- cosine --------------------------------------------------------------


def test_cosine_examples():
    assert cosine([3.0, 4.0], [3.0, 4.0]) == 1.0
    assert cosine([1.0, 0.0], [0.0, 1.0]) == 0.0
    assert abs(cosine([1.0, 1.0], [1.0, 0.0]) - 0.70710678) < 1e-8


def test_cosine_zero_vector():
    with pytest.raises(DomainError):
        cosine([0.0, 0.0], [1.0, 0.0])


def test_cosine_scale_invariance():
    rng = np.random.default_rng(4)
    for _ in range(200):
        u = rng.standard_normal(6)
        v = rng.standard_normal(6)
        a, b = rng.uniform(0.01, 100, size=2)
        assert abs(cosine(a * u, b * v) - cosine(u, v)) < 1e-12


def test_cosine_orthogonal_invariance():
    rng = np.random.default_rng(5)
    for _ in range(50):
        q = random_orthogonal(8, rng)
        u = rng.standard_normal(8)
        v = rng.standard_normal(8)
        assert abs(cosine(q @ u, q @ v) - cosine(u, v)) < 1e-9


def test_cosine_clamped_range():
    rng = np.random.default_rng(6)
    for _ in range(500):
        u = rng.standard_normal(3) * 10.0 ** rng.integers(-3, 4)
        assert -1.0 <= cosine(u, u * rng.uniform(0.5, 2.0)) <= 1.0


# --- config --------------------------------------------------------------


def test_config_validation():
    key = bytes(16)
    WatermarkConfig(key=key)  # defaults valid
    with pytest.raises(ValidationError):
        WatermarkConfig(key=b"short")
    with pytest.raises(ValidationError):
        WatermarkConfig(key=key, alpha=0.2)
    with pytest.raises(ValidationError):
        WatermarkConfig(key=key, gamma=1.0)
    with pytest.raises(ValidationError):
        WatermarkConfig(key=key, gamma=0.02, alpha=0.025)
    with pytest.raises(ValidationError):
        WatermarkConfig(key=key, delta=-1.0)
    with pytest.raises(ValidationError):
        WatermarkConfig(key=key, epsilon=0.0)


def test_config_key_halves_little_endian():
    cfg = WatermarkConfig.from_hex_key("000102030405060708090a0b0c0d0e0f")
    assert cfg.k0 == 0x0706050403020100
    assert cfg.k1 == 0x0F0E0D0C0B0A0908
