"""Adaptive-quadrature utilities for the desk-scale oracles.

These integrate against the standard-normal mixing density for families
with eps_dim <= 2 and against the marginal over z for z_dim <= 2. They are
test oracles: accuracy is favored over speed, and failure to converge
raises instead of returning a sloppy value.
"""

from __future__ import annotations

import numpy as np
from scipy import integrate

from .conditionals import LOG_2PI
from .errors import QuadratureError
from .family import SemiImplicitQ
from .nn import mlp_forward


def _phi(e: float) -> float:
    return np.exp(-0.5 * e * e) / np.sqrt(2.0 * np.pi)


def gauss_weighted_integral(f, dim: int, epsabs: float = 1e-11) -> float:
    """Integral of f(eps) * N(eps | 0, I) over R^dim for dim in {1, 2}."""
    if dim == 1:
        val, err = integrate.quad(
            lambda e: f(np.array([e])) * _phi(e),
            -np.inf, np.inf, epsabs=epsabs, epsrel=1e-10, limit=400,
        )
    elif dim == 2:
        val, err = integrate.dblquad(
            lambda e2, e1: f(np.array([e1, e2])) * _phi(e1) * _phi(e2),
            -np.inf, np.inf, -np.inf, np.inf, epsabs=epsabs, epsrel=1e-9,
        )
    else:
        raise ValueError("gauss_weighted_integral supports dim 1 or 2 only")
    if err > max(epsabs * 100.0, 1e-8 * max(1.0, abs(val))):
        raise QuadratureError(f"integral error estimate {err:.2e} too large")
    return val


def conditional_density(q: SemiImplicitQ, z: np.ndarray, eps: np.ndarray) -> float:
    mean = mlp_forward(q.cond_net, eps)
    resid = (z - mean) / q.scale
    return float(
        np.exp(-0.5 * np.sum(resid**2 + LOG_2PI + 2.0 * np.log(q.scale)))
    )


def marginal_density_quadrature(q: SemiImplicitQ, z: np.ndarray) -> float:
    """q(z) by adaptive quadrature over the mixing variable (eps_dim <= 2)."""
    z = np.asarray(z, dtype=np.float64)
    return gauss_weighted_integral(lambda e: conditional_density(q, z, e), q.eps_dim)


def marginal_logdensity_quadrature(q: SemiImplicitQ, z: np.ndarray) -> float:
    val = marginal_density_quadrature(q, z)
    if val <= 0:
        raise QuadratureError("marginal density quadrature returned a non-positive value")
    return float(np.log(val))


def marginal_grad_quadrature(q: SemiImplicitQ, z: np.ndarray) -> np.ndarray:
    """grad_z log q(z) by quadrature: d/dz of the mixing integral over q(z)."""
    z = np.asarray(z, dtype=np.float64)
    denom = marginal_density_quadrature(q, z)
    if denom <= 0:
        raise QuadratureError("marginal density vanished under quadrature")
    var = q.scale**2
    grad = np.empty(q.z_dim)
    for k in range(q.z_dim):
        def integrand(e, k=k):
            mean = mlp_forward(q.cond_net, e)
            return conditional_density(q, z, e) * (mean[k] - z[k]) / var[k]

        grad[k] = gauss_weighted_integral(integrand, q.eps_dim) / denom
    return grad


def integrate_over_z(fn, z_dim: int, epsabs: float = 1e-9) -> float:
    """Adaptive quadrature of fn(z) over R^z_dim for z_dim in {1, 2}."""
    if z_dim == 1:
        val, err = integrate.quad(
            lambda z1: fn(np.array([z1])),
            -np.inf, np.inf, epsabs=epsabs, epsrel=1e-8, limit=300,
        )
    elif z_dim == 2:
        val, err = integrate.dblquad(
            lambda z2, z1: fn(np.array([z1, z2])),
            -np.inf, np.inf, -np.inf, np.inf, epsabs=epsabs, epsrel=1e-7,
        )
    else:
        raise ValueError("integrate_over_z supports z_dim 1 or 2 only")
    if err > max(epsabs * 100.0, 1e-6 * max(1.0, abs(val))):
        raise QuadratureError(f"outer integral error estimate {err:.2e} too large")
    return val


def expectation_over_marginal(q: SemiImplicitQ, f, epsabs: float = 1e-9) -> float:
    """E_{q(z)}[f(z)] by outer quadrature over z (z_dim <= 2, eps_dim <= 2).

    Where the marginal density underflows to zero the integrand is taken as
    zero, so integrands like f = -log q(z) stay well defined in the far tails.
    """

    def outer(z):
        qz = marginal_density_quadrature(q, z)
        if qz < 1e-290:
            return 0.0
        return qz * f(z)

    return integrate_over_z(outer, q.z_dim, epsabs=epsabs)


def normalization_2d(log_density, lo: float = -10.0, hi: float = 10.0) -> float:
    """Mass of exp(log_density) over [lo, hi]^2 by adaptive 2-d quadrature."""
    val, err = integrate.dblquad(
        lambda y, x: np.exp(log_density(np.array([x, y]))), lo, hi, lo, hi,
        epsabs=1e-9, epsrel=1e-8,
    )
    if err > 1e-6:
        raise QuadratureError(f"normalization error estimate {err:.2e} too large")
    return val


def moments_2d(log_density, xlo=-12.0, xhi=12.0, ylo=None, yhi=None):
    """Mean vector and covariance matrix of a 2-d density by quadrature.

    The y bounds may be callables of x, so curved supports (the bent ridge
    of the banana density) can be covered without an enormous box.
    """
    ylo = xlo if ylo is None else ylo
    yhi = xhi if yhi is None else yhi

    def raw(fn):
        val, _ = integrate.dblquad(
            lambda y, x: fn(x, y) * np.exp(log_density(np.array([x, y]))),
            xlo, xhi, ylo, yhi, epsabs=1e-9, epsrel=1e-8,
        )
        return val

    mass = raw(lambda x, y: 1.0)
    mean = np.array([raw(lambda x, y: x), raw(lambda x, y: y)]) / mass
    exx = raw(lambda x, y: x * x) / mass
    eyy = raw(lambda x, y: y * y) / mass
    exy = raw(lambda x, y: x * y) / mass
    cov = np.array(
        [
            [exx - mean[0] ** 2, exy - mean[0] * mean[1]],
            [exy - mean[0] * mean[1], eyy - mean[1] ** 2],
        ]
    )
    return mean, cov
