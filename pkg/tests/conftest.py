import numpy as np
import pytest

from envrisk.model import build_distribution


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def uniform4():
    return build_distribution([1, 2, 3, 4], [1, 1, 1, 1])


def random_dist(rng, n=None, scale=5.0):
    n = int(rng.integers(1, 12)) if n is None else n
    return build_distribution(rng.normal(0, scale, size=n), rng.uniform(0.05, 1.0, size=n))
