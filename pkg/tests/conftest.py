import numpy as np
import pytest

from gaussot.instances import random_spd


def make_spd(rng, d, eig_range=(0.5, 2.5)):
    return random_spd(rng, d, eig_range=eig_range)


def make_correlation(rng, d, op_norm):
    """Raw ndarray rescaled to the requested operator norm (may exceed 1)."""
    r = rng.standard_normal((d, d))
    return r * (op_norm / np.linalg.norm(r, 2))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
