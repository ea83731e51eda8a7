import pytest

from core.cache import clear_caches
from core.envelope import Mixture
from core.families import Exponential, Gamma, Gaussian, Rayleigh


@pytest.fixture(autouse=True)
def fresh_caches():
    clear_caches()
    yield


@pytest.fixture
def gaussian_pair():
    m = Mixture.of([(0.4, Gaussian(-1.0, 0.8)), (0.6, Gaussian(2.0, 1.2))])
    m_prime = Mixture.of([(0.5, Gaussian(0.0, 1.0)), (0.3, Gaussian(3.0, 0.5)), (0.2, Gaussian(-3.0, 2.0))])
    return m, m_prime


# small two-component mixtures per family, used by the oracle tests
SMALL_PAIRS = {
    "exponential": (
        Mixture.of([(0.3, Exponential(0.5)), (0.7, Exponential(2.0))]),
        Mixture.of([(0.6, Exponential(1.0)), (0.4, Exponential(4.0))]),
    ),
    "rayleigh": (
        Mixture.of([(0.5, Rayleigh(1.0)), (0.5, Rayleigh(3.0))]),
        Mixture.of([(0.2, Rayleigh(0.7)), (0.8, Rayleigh(2.0))]),
    ),
    "gaussian": (
        Mixture.of([(0.4, Gaussian(-1.0, 0.8)), (0.6, Gaussian(2.0, 1.2))]),
        Mixture.of([(0.5, Gaussian(0.0, 1.0)), (0.5, Gaussian(3.0, 0.5))]),
    ),
    "gamma": (
        Mixture.of([(0.5, Gamma(2.0, 1.0)), (0.5, Gamma(3.0, 2.0))]),
        Mixture.of([(0.3, Gamma(2.0, 0.5)), (0.7, Gamma(4.0, 1.5))]),
    ),
}


@pytest.fixture(params=sorted(SMALL_PAIRS))
def small_pair(request):
    return SMALL_PAIRS[request.param]
