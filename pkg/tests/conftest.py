import numpy as np
import pytest

from michs.model import PriorParams
from tests.oracles import random_dictionary


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def unit_params():
    return PriorParams(sigma2=1.0, sigma_n2=1.0, lam=1.0)


@pytest.fixture
def small_dictionary(rng):
    return random_dictionary(rng, m=6, per_class=3)
