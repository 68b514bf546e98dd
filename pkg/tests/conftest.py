import numpy as np
import pytest

from semivi.family import SemiImplicitQ, make_family
from semivi.nn import Layer, MlpParams, softplus_inv


def linear_gaussian_family(a=2.0, sigma=1.0) -> SemiImplicitQ:
    """1-d family with mean a*eps and stddev sigma: marginal N(0, a^2 + sigma^2)."""
    net = MlpParams([Layer(np.array([[a]]), np.zeros(1), "identity")])
    return SemiImplicitQ(1, 1, net, np.array([softplus_inv(sigma)]))


def small_nonlinear_family(seed=0, hidden=(4,), eps_dim=1, z_dim=1, init_scale=0.8):
    """Random small ReLU family for quadrature-oracle tests."""
    rng = np.random.default_rng(seed)
    return make_family(eps_dim, z_dim, hidden, rng, init_scale=init_scale)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
