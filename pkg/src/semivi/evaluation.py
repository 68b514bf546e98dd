"""Monte Carlo ELBO and log-marginal estimation, plus the quadrature ELBO oracle.

All density averages are accumulated in log space with log-sum-exp; the
plain density-space formulas underflow in 64-bit arithmetic at realistic
dimensions.
"""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

from .family import SemiImplicitQ, marginal_logdensity_estimate, sample_many
from .quadrature import integrate_over_z, marginal_density_quadrature
from .targets import TargetModel


def elbo_terms(
    target: TargetModel,
    q: SemiImplicitQ,
    n_outer: int,
    M: int,
    rng: np.random.Generator,
    batch=None,
) -> np.ndarray:
    """Per-draw terms log p(x, z_s) - log qhat_M(z_s), s = 1..n_outer.

    The finite-M inner estimate underestimates log q(z) on average, so the
    mean of these terms is biased upward for the true ELBO and converges
    from above as M grows.
    """
    if n_outer < 1 or M < 1:
        raise ValueError("need n_outer >= 1 and M >= 1")
    _, _, zs = sample_many(q, n_outer, rng)
    terms = np.empty(n_outer)
    for s in range(n_outer):
        logq = marginal_logdensity_estimate(q, zs[s], M, rng)
        terms[s] = target.log_joint(zs[s], batch) - logq
    return terms


def elbo_estimate(
    target: TargetModel,
    q: SemiImplicitQ,
    n_outer: int,
    M: int,
    rng: np.random.Generator,
    batch=None,
) -> float:
    """Monte Carlo ELBO estimate (mean of `elbo_terms`)."""
    return float(np.mean(elbo_terms(target, q, n_outer, M, rng, batch)))


def is_log_marginal(
    target: TargetModel,
    q: SemiImplicitQ,
    S: int,
    M: int,
    rng: np.random.Generator,
) -> float:
    """Importance-sampling log-evidence with q as the proposal.

    log( (1/S) sum_s p(x, z_s) / qhat_M(z_s) ), z_s ~ q, with the inner
    marginal density replaced by its M-sample estimate; everything stays in
    log space.
    """
    if S < 1 or M < 1:
        raise ValueError("need S >= 1 and M >= 1")
    _, _, zs = sample_many(q, S, rng)
    logw = np.empty(S)
    for s in range(S):
        logq = marginal_logdensity_estimate(q, zs[s], M, rng)
        logw[s] = target.log_joint(zs[s]) - logq
    return float(logsumexp(logw) - np.log(S))


def exact_elbo_quadrature(target: TargetModel, q: SemiImplicitQ) -> float:
    """Adaptive-quadrature ELBO E_q[log p - log q] for z_dim <= 2, eps_dim <= 2.

    The marginal log q(z) inside the expectation is itself computed by
    quadrature over the mixing variable. Absolute error target 1e-6; raises
    QuadratureError when the integrator cannot certify it.
    """
    if q.z_dim > 2 or q.eps_dim > 2:
        raise ValueError("quadrature ELBO requires z_dim <= 2 and eps_dim <= 2")

    def integrand(z):
        qz = marginal_density_quadrature(q, z)
        if qz < 1e-290:  # q log(p/q) -> 0 in the far tails
            return 0.0
        return qz * (target.log_joint(z) - np.log(qz))

    return integrate_over_z(integrand, q.z_dim, epsabs=1e-8)


def rolling_mean(values, window: int) -> np.ndarray:
    """Trailing-window running mean (window shrinks at the start of the series)."""
    if window < 1:
        raise ValueError("window must be >= 1")
    values = np.asarray(values, dtype=np.float64)
    out = np.empty_like(values)
    csum = np.cumsum(values)
    for i in range(len(values)):
        lo = max(0, i - window + 1)
        out[i] = (csum[i] - (csum[lo - 1] if lo > 0 else 0.0)) / (i - lo + 1)
    return out
