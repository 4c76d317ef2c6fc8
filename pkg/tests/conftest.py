import numpy as np
import pytest

from polaronlab.initial_data import random_smooth_state
from polaronlab.spectral import build_form_factors, build_grid


@pytest.fixture(scope="session")
def grid16():
    """d=3 box used by most field-level tests."""
    return build_grid(3, 16, 16.0)


@pytest.fixture(scope="session")
def ff16(grid16):
    return build_form_factors(grid16, sigma0=0.75)


@pytest.fixture(scope="session")
def grid8():
    return build_grid(3, 8, 12.0)


@pytest.fixture(scope="session")
def ff8(grid8):
    return build_form_factors(grid8, sigma0=0.8)


@pytest.fixture
def smooth_state(grid16):
    return random_smooth_state(grid16, seed=11, u_amp=0.4, alpha_amp=0.25,
                               k_cut=0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
