import numpy as np
import pytest

from ebsmooth import NoiseSpec, build_basis, make_function


@pytest.fixture(scope="session")
def basis_500_q2():
    return build_basis(500, 2)


@pytest.fixture(scope="session")
def f1_500():
    return make_function("f1", 500)


@pytest.fixture(scope="session")
def iid_noise():
    return NoiseSpec("iid", (), 0.33)


def noisy_sample(f, sigma, seed, spec=None):
    rng = np.random.default_rng(seed)
    return f + sigma * rng.standard_normal(f.size)
