"""Surrogate lower bound on the ELBO via finite mixing-sample density averages.

The bound replaces the intractable log q(z) with the log of an
(L+1)-sample average of conditional densities: the conditional that
generated z plus L fresh mixing draws. It lower-bounds the ELBO for every
L, tightens as L grows, and the L used during optimization must be
non-decreasing over iterations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import logsumexp

from .family import SemiImplicitQ
from .gradients import FamilyGrads, backprop_through_h
from .family import DrawRecord
from .nn import mlp_forward, mlp_vjp, sigmoid
from .targets import TargetModel


@dataclass
class SiviConfig:
    """Schedule settings for the surrogate bound's mixing-sample count."""

    L_final: int = 200
    schedule: Optional[Callable[[int, int], int]] = None

    def L_at(self, t: int, t_max: int) -> int:
        if self.schedule is not None:
            return self.schedule(t, t_max)
        return l_schedule_linear(t, t_max, self.L_final)


def l_schedule_linear(t: int, t_max: int, L_final: int) -> int:
    """Floor-interpolated non-decreasing ramp from 1 at t=0 to L_final at t=t_max."""
    if not 0 <= t <= t_max:
        raise ValueError("need 0 <= t <= t_max")
    if L_final < 1:
        raise ValueError("L_final must be >= 1")
    if t_max == 0:
        return L_final
    return 1 + (L_final - 1) * t // t_max


def sivi_surrogate_gradient(
    target: TargetModel,
    q: SemiImplicitQ,
    L: int,
    rng: np.random.Generator,
    batch=None,
):
    """Single-sample surrogate-bound estimate and its parameter gradient.

    Draws eps, u (so z = h(u; eps)) and L augmenting mixing samples, then
    differentiates the bound through the sampling map and through every
    conditional density term, holding the draws themselves fixed.
    Returns (value, FamilyGrads); the gradient is an ascent direction.
    """
    if L < 0:
        raise ValueError("L must be >= 0")
    eps0 = rng.standard_normal(q.eps_dim)
    u = rng.standard_normal(q.z_dim)
    eps_aug = rng.standard_normal((L, q.eps_dim))
    return sivi_value_and_grads(target, q, eps0, u, eps_aug, batch)


def sivi_value_and_grads(
    target: TargetModel,
    q: SemiImplicitQ,
    eps0: np.ndarray,
    u: np.ndarray,
    eps_aug: np.ndarray,
    batch=None,
):
    """Deterministic surrogate value and gradient given all random draws.

    Exposed separately so finite-difference tests can freeze the noise.
    """
    eps_aug = np.asarray(eps_aug, dtype=np.float64).reshape(-1, q.eps_dim)
    all_eps = np.vstack([eps0[None, :], eps_aug])
    means = mlp_forward(q.cond_net, all_eps)
    scale = q.scale
    var = scale**2
    z = means[0] + scale * u

    resid = (z - means) / var
    logq = -0.5 * np.sum(
        ((z - means) / scale) ** 2 + np.log(2.0 * np.pi * var), axis=1
    )
    log_avg = float(logsumexp(logq) - np.log(all_eps.shape[0]))
    value = float(target.log_joint(z, batch)) - log_avg
    weights = np.exp(logq - logsumexp(logq))

    # path through z = h(u; eps0): model gradient plus the density terms'
    # z-sensitivity
    v = target.grad_z_log_joint(z, batch) + weights @ resid
    rec = DrawRecord(eps=np.asarray(eps0, dtype=np.float64), u=np.asarray(u), z=z)
    grads = backprop_through_h(q, rec, v)

    # direct dependence of each conditional density on the parameters,
    # batched over the L+1 mixing draws
    net_direct, _ = mlp_vjp(q.cond_net, all_eps, -weights[:, None] * resid)
    dscale = -weights @ (resid**2 * var / scale - 1.0 / scale)
    grads.add_(FamilyGrads(net_direct, dscale * sigmoid(q.scale_raw)))
    return value, grads
