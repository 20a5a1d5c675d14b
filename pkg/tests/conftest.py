import numpy as np
import pytest

from vismark.embeddings import WatermarkConfig
from vismark.harness import SceneSpec, ToyLMSpec, build_world

KEY_HEX = "000102030405060708090a0b0c0d0e0f"


@pytest.fixture(scope="session")
def cfg():
    return WatermarkConfig.from_hex_key(KEY_HEX, alpha=0.025, gamma=0.5, delta=2.0)


@pytest.fixture(scope="session")
def small_world():
    """Fast world for unit tests: 256 tokens, 16 dims, 4 patches."""
    return build_world(
        ToyLMSpec(seed=11, vocab_size=256, dim=16, temperature=8.0),
        SceneSpec(seed=5, patches=4, dim=16),
    )


@pytest.fixture(scope="session")
def desk_world():
    """Desk-scale world used by acceptance-level checks."""
    return build_world(
        ToyLMSpec(seed=1, vocab_size=2000, dim=64, temperature=8.0),
        SceneSpec(seed=7, patches=16, dim=64),
    )


def random_orthogonal(dim: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q * np.sign(np.diag(r))
