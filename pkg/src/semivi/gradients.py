"""Unbiased ELBO-gradient estimation for the semi-implicit family.

The reparameterized gradient splits into a model term, which pulls
grad_z log p(x, z) back through the sampling map, and an entropy term,
which needs grad_z log q(z). The latter is intractable directly but equals
the expectation of grad_z log q(z|eps') under the reverse conditional
q(eps'|z), so it is estimated from reverse-conditional samples produced by
stationary-start HMC. No gradient flows through those samples: the
eps'-dependent factor is a constant with respect to the variational
parameters, and the score-function contribution it would otherwise carry
has expectation zero.

Closed-form and quadrature oracles for grad_z log q(z) live here too; they
back the correctness tests of the estimator.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ShapeError
from .family import DrawRecord, SemiImplicitQ, sample
from .hmc import HmcConfig, hmc_sample
from .nn import (
    MlpParams,
    linear_collapse,
    mlp_forward,
    mlp_vjp,
    require_finite,
    sigmoid,
    zeros_like_params,
)
from .quadrature import marginal_grad_quadrature
from .targets import TargetModel


@dataclass
class FamilyGrads:
    """Gradient container shaped like the family's parameters."""

    net: MlpParams
    scale_raw: np.ndarray

    @staticmethod
    def zeros(q: SemiImplicitQ) -> "FamilyGrads":
        return FamilyGrads(zeros_like_params(q.cond_net), np.zeros(q.z_dim))

    def add_(self, other: "FamilyGrads") -> "FamilyGrads":
        for mine, theirs in zip(self.net.layers, other.net.layers):
            mine.weight += theirs.weight
            mine.bias += theirs.bias
        self.scale_raw += other.scale_raw
        return self

    def scale_(self, c: float) -> "FamilyGrads":
        for layer in self.net.layers:
            layer.weight *= c
            layer.bias *= c
        self.scale_raw *= c
        return self

    def arrays(self) -> list[np.ndarray]:
        out = []
        for layer in self.net.layers:
            out.append(layer.weight)
            out.append(layer.bias)
        out.append(self.scale_raw)
        return out

    def ravel(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def norm(self) -> float:
        return float(np.linalg.norm(self.ravel()))


@dataclass
class GradEstimate:
    """One stochastic ELBO-gradient estimate (ascent direction) plus diagnostics."""

    grads: FamilyGrads
    model_norm: float
    entropy_norm: float
    hmc_acceptance: float
    hmc_step_size: float
    hmc_energy_error: float


def backprop_through_h(q: SemiImplicitQ, rec: DrawRecord, upstream: np.ndarray) -> FamilyGrads:
    """Pull a z-space vector back through z = net(eps) + softplus(raw) * u."""
    upstream = require_finite(upstream, "z-space gradient")
    net_grads, _ = mlp_vjp(q.cond_net, rec.eps, upstream)
    scale_grad = upstream * rec.u * sigmoid(q.scale_raw)
    return FamilyGrads(net_grads, scale_grad)


def model_term(
    target: TargetModel,
    q: SemiImplicitQ,
    rec: DrawRecord,
    batch=None,
) -> FamilyGrads:
    """grad_z log p(x, z) at the draw, pulled back through the sampling map."""
    v = target.grad_z_log_joint(rec.z, batch)
    return backprop_through_h(q, rec, v)


def entropy_term(q: SemiImplicitQ, rec: DrawRecord, eps_primes: np.ndarray) -> FamilyGrads:
    """Entropy part of the gradient from reverse-conditional samples.

    w = -(1/m) sum grad_z log q(z | eps'_j), evaluated at the record's z and
    treated as a constant in the variational parameters, then pulled back
    through the sampling map exactly like the model term.
    """
    eps_primes = np.atleast_2d(np.asarray(eps_primes, dtype=np.float64))
    if eps_primes.size == 0:
        raise ValueError("eps_primes must be nonempty")
    if eps_primes.shape[1] != q.eps_dim:
        raise ShapeError("eps_primes rows must have length eps_dim")
    means = mlp_forward(q.cond_net, eps_primes)
    w = (rec.z - means).mean(axis=0) / q.scale**2
    return backprop_through_h(q, rec, w)


def elbo_gradient(
    target: TargetModel,
    q: SemiImplicitQ,
    S: int = 1,
    hmc_cfg: Optional[HmcConfig] = None,
    rng: Optional[np.random.Generator] = None,
    batch=None,
    step_size: Optional[float] = None,
) -> GradEstimate:
    """Average of model + entropy terms over S fresh draws.

    Each draw runs its own reverse-conditional HMC chain initialized at the
    draw's eps. The adapted step size is carried across the S chains and
    returned so a training loop can feed it back in.
    """
    if S < 1:
        raise ValueError("S must be >= 1")
    if rng is None:
        raise ValueError("an rng is required")
    hmc_cfg = hmc_cfg or HmcConfig()

    total = FamilyGrads.zeros(q)
    model_total = FamilyGrads.zeros(q)
    entropy_total = FamilyGrads.zeros(q)
    accept = np.empty(S)
    denergy = np.empty(S)
    step = step_size
    for s in range(S):
        rec = sample(q, rng)
        eps_primes, info = hmc_sample(q, rec.z, rec.eps, hmc_cfg, rng, step_size=step)
        step = info["step_size"]
        accept[s] = info["acceptance_rate"]
        denergy[s] = info["mean_abs_energy_error"]
        g_mod = model_term(target, q, rec, batch)
        g_ent = entropy_term(q, rec, eps_primes)
        model_total.add_(g_mod)
        entropy_total.add_(g_ent)
        total.add_(g_mod).add_(g_ent)
    total.scale_(1.0 / S)
    model_total.scale_(1.0 / S)
    entropy_total.scale_(1.0 / S)
    return GradEstimate(
        grads=total,
        model_norm=model_total.norm(),
        entropy_norm=entropy_total.norm(),
        hmc_acceptance=float(accept.mean()),
        hmc_step_size=float(step),
        hmc_energy_error=float(denergy.mean()),
    )


# ---------------------------------------------------------------------------
# closed-form oracles for linear-Gaussian families (purely linear mean nets)
# ---------------------------------------------------------------------------


def marginal_moments(q: SemiImplicitQ):
    """Exact marginal N(b, W W' + diag(scale^2)) of a linear-Gaussian family."""
    W, b = linear_collapse(q.cond_net)
    S = W @ W.T + np.diag(q.scale**2)
    return b, S


def reverse_conditional_moments(q: SemiImplicitQ, z: np.ndarray):
    """Exact reverse conditional N(mean, cov) of eps given z (linear family)."""
    z = np.asarray(z, dtype=np.float64)
    W, b = linear_collapse(q.cond_net)
    _, S = marginal_moments(q)
    gain = W.T @ np.linalg.inv(S)
    mean = gain @ (z - b)
    cov = np.eye(q.eps_dim) - gain @ W
    return mean, cov


def grad_z_log_marginal_oracle(q: SemiImplicitQ, z: np.ndarray, mode: str = "conjugate"):
    """Exact grad_z log q(z), by conjugacy (linear family) or quadrature.

    Conjugate mode requires every network activation to be the identity;
    quadrature mode requires eps_dim <= 2. Test-oracle use only.
    """
    z = np.asarray(z, dtype=np.float64)
    if mode == "conjugate":
        b, S = marginal_moments(q)
        return -np.linalg.solve(S, z - b)
    if mode == "quadrature":
        if q.eps_dim > 2:
            raise ValueError("quadrature oracle requires eps_dim <= 2")
        return marginal_grad_quadrature(q, z)
    raise ValueError(f"unknown oracle mode {mode!r}")


def marginal_logdensity_param_grads_conjugate(q: SemiImplicitQ, z: np.ndarray) -> FamilyGrads:
    """d/d theta log q_theta(z) at fixed z for a single-linear-layer family.

    This is the score function the estimator deliberately drops; its mean
    under q is zero, which the tests confirm by Monte Carlo.
    """
    if len(q.cond_net.layers) != 1 or q.cond_net.layers[0].activation != "identity":
        raise ValueError("conjugate score requires a single linear layer")
    z = np.asarray(z, dtype=np.float64)
    W = q.cond_net.layers[0].weight
    b, S = marginal_moments(q)
    Sinv = np.linalg.inv(S)
    alpha = Sinv @ (z - b)
    grads = FamilyGrads.zeros(q)
    grads.net.layers[0].bias[...] = alpha
    grads.net.layers[0].weight[...] = (np.outer(alpha, alpha) - Sinv) @ W
    dsigma = (alpha**2 - np.diag(Sinv)) * q.scale
    grads.scale_raw[...] = dsigma * sigmoid(q.scale_raw)
    return grads
