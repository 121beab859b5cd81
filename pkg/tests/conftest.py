import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def gaussian_pool(rng):
    return rng.standard_normal((300, 10))
