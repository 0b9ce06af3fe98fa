import numpy as np
import pytest

from firefront.geo import FireDomain, build_grid


@pytest.fixture
def domain():
    return FireDomain.around(40.0, -120.0, 10000.0, 10000.0, 0.0, 3.0)


@pytest.fixture
def grid(domain):
    return build_grid(domain, 250.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
