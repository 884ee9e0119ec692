import numpy as np
import pytest

from matpal.materials import MaterialMaps


def random_material(rng: np.random.Generator, h: int = 8, w: int = 8,
                    margin: float = 0.05) -> MaterialMaps:
    """Random valid material with values kept away from the [0,1] bounds."""
    albedo = rng.uniform(margin, 1.0 - margin, (h, w, 3)).astype(np.float32)
    rough = rng.uniform(0.15, 0.95, (h, w, 1)).astype(np.float32)
    raw = rng.normal(0.0, 0.35, (h, w, 3))
    raw[..., 2] = np.abs(raw[..., 2]) + 0.5
    n = raw / np.linalg.norm(raw, axis=-1, keepdims=True)
    return MaterialMaps(albedo, n.astype(np.float32), rough)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
