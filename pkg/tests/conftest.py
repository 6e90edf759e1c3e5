import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(0xA5C3)


def make_rng(seed):
    return np.random.default_rng(seed)
