import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from microdoppler.scenario import load_scenario

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture
def three_tone():
    """Noiseless 512-pulse body + two sidebands, bins 30/40/50."""
    return load_scenario("scene_three_tone")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_hermitian(rng, n, psd=False):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return a @ a.conj().T if psd else a + a.conj().T
