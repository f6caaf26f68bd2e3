import numpy as np
import pytest

from bmoblo.geometry import make_context


@pytest.fixture(scope="session")
def ctx_half():
    return make_context(0.5)


@pytest.fixture(scope="session")
def ctx_quarter():
    return make_context(0.25)


@pytest.fixture(scope="session")
def ctx_tenth():
    return make_context(0.1)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240811)


def sample_strip(rng, n, window, ctx):
    """Area-uniform points of the strip with |x1| <= window."""
    x1 = rng.uniform(-window, window, n)
    gap = rng.uniform(0.0, 1.0, n)
    return x1, x1 * x1 + gap
