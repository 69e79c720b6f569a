import functools

import pytest

from fracou.covariance import OuModelSpec, gram_matrix
from fracou.noise import NoiseSpec


@functools.lru_cache(maxsize=None)
def cached_gram(family, hurst, n, theta=1.0, h=1.0):
    noise = NoiseSpec.fbm(hurst) if family == "fbm" else NoiseSpec.sub_fbm(hurst)
    return gram_matrix(OuModelSpec(theta, h, n, noise))


@pytest.fixture
def gram_of():
    return cached_gram
