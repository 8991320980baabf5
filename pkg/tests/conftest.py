import numpy as np
import pytest

from geomimu import fixtures


@pytest.fixture
def chain2():
    return fixtures.chain_body(2)


@pytest.fixture
def chain3():
    return fixtures.chain_body(3)


@pytest.fixture
def still(chain2):
    return fixtures.constant_motion(chain2, frames=60)


@pytest.fixture
def wiggle(chain2):
    return fixtures.wiggling_motion(chain2, frames=120, seed=7)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
