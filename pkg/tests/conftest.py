import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from genefunnel.data import Dataset


@pytest.fixture
def separable_ds():
    """20 samples, 3 genes; gene 0 separates the classes perfectly."""
    rng = np.random.default_rng(11)
    labels = np.array([0, 1] * 10)
    x = rng.normal(0.0, 0.3, size=(20, 3))
    x[:, 0] = labels * 4.0 + rng.normal(0.0, 0.2, 20)
    return Dataset(x, labels, ("g0", "g1", "g2"), ("a", "b"))


@pytest.fixture
def ga_toy_ds():
    """24 samples, 6 genes; {2, 4} is the unique lexicographic optimum
    (fitness 1.0) under the default GA fitness, verified by brute force
    in the tests that use it."""
    rng = np.random.default_rng(1)
    m = 24
    labels = np.array([0, 1] * (m // 2))
    x = rng.normal(0.0, 1.0, size=(m, 6))
    x[:, 2] = labels + rng.normal(0.0, 0.45, m)
    x[:, 4] = labels + rng.normal(0.0, 0.45, m)
    return Dataset(x, labels, tuple(f"g{i}" for i in range(6)), ("a", "b"))
