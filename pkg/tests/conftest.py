import numpy as np
import pytest

from pltorsion.zoo import gen_lens, gen_sphere3, gen_sphere4


@pytest.fixture(scope="session")
def sphere3():
    return gen_sphere3(7)


@pytest.fixture(scope="session")
def sphere4():
    return gen_sphere4(1)


@pytest.fixture(scope="session")
def lens51():
    return gen_lens(5, 1, 1, 0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
