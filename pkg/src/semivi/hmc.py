"""HMC targeting the reverse conditional q(eps | z) ~ q(z | eps) q(eps).

The chain is initialized at the eps that generated z, which is already a
draw from the target, so every Metropolis-corrected iteration yields a
stationary sample and no burn-in is required for correctness. A short
burn-in is still run to decorrelate the kept samples from the initializer,
and the step size is multiplicatively adapted during it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .conditionals import LOG_2PI
from .errors import NonFiniteError
from .family import SemiImplicitQ
from .nn import mlp_forward, mlp_vjp, require_finite


@dataclass
class HmcConfig:
    """Reverse-conditional sampler settings.

    `step_size=None` means 0.1 / sqrt(eps_dim) at first use; with
    `adapt_during_burn` the step is scaled x1.02 on accept and x0.98 on
    reject during the burn-in iterations, chasing `target_accept`, then
    frozen for the kept iterations.
    """

    n_burn: int = 5
    n_keep: int = 5
    leapfrog_steps: int = 5
    step_size: Optional[float] = None
    adapt_during_burn: bool = True
    target_accept: float = 0.9

    def __post_init__(self):
        if self.n_burn < 0 or self.n_keep < 1 or self.leapfrog_steps < 1:
            raise ValueError("need n_burn >= 0, n_keep >= 1, leapfrog_steps >= 1")
        if self.step_size is not None and self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if not 0.0 < self.target_accept < 1.0:
            raise ValueError("target_accept must lie in (0, 1)")

    def initial_step_size(self, eps_dim: int) -> float:
        if self.step_size is not None:
            return self.step_size
        return 0.1 / np.sqrt(eps_dim)


@dataclass
class ChainState:
    """Current position with its cached log-target value and gradient."""

    position: np.ndarray
    log_target: float
    grad: np.ndarray


def reverse_log_target(q: SemiImplicitQ, z: np.ndarray, eps: np.ndarray):
    """log q(z|eps) + log q(eps) and its gradient in eps.

    The value is the exact joint log-density (no constants dropped); the
    gradient chains the conditional's mean-sensitivity through the network
    and adds the standard-normal prior term -eps.
    """
    z = np.asarray(z, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    mean = mlp_forward(q.cond_net, eps)
    scale = q.scale
    resid = (z - mean) / scale
    value = float(
        -0.5 * np.sum(resid**2 + LOG_2PI + 2.0 * np.log(scale))
        - 0.5 * np.sum(eps**2)
        - 0.5 * q.eps_dim * LOG_2PI
    )
    # d/d mean log q(z|mean) = (z - mean) / scale^2, pulled back through the net
    _, input_grad = mlp_vjp(q.cond_net, eps, resid / scale)
    grad = input_grad - eps
    require_finite(grad, "reverse-conditional gradient")
    return value, grad


def leapfrog(state, grad_fn, steps: int, step_size: float):
    """Standard leapfrog with identity mass: half-kick, drift, ..., half-kick.

    `grad_fn` returns the gradient of the log-target (not of the potential).
    Returns the final (position, momentum).
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    position, momentum = state
    position = np.array(position, dtype=np.float64)
    momentum = np.array(momentum, dtype=np.float64)
    grad = require_finite(grad_fn(position), "leapfrog gradient")
    momentum = momentum + 0.5 * step_size * grad
    for k in range(steps):
        position = position + step_size * momentum
        grad = require_finite(grad_fn(position), "leapfrog gradient")
        if k < steps - 1:
            momentum = momentum + step_size * grad
    momentum = momentum + 0.5 * step_size * grad
    return position, momentum


def _trajectory(q, z, state: ChainState, momentum, steps, step_size):
    """Leapfrog reusing the cached gradient; returns the proposal ChainState
    and final momentum."""
    position = state.position
    grad = state.grad
    momentum = momentum + 0.5 * step_size * grad
    value = state.log_target
    for k in range(steps):
        position = position + step_size * momentum
        value, grad = reverse_log_target(q, z, position)
        if k < steps - 1:
            momentum = momentum + step_size * grad
    momentum = momentum + 0.5 * step_size * grad
    return ChainState(position, value, grad), momentum


def hmc_sample(
    q: SemiImplicitQ,
    z: np.ndarray,
    eps_init: np.ndarray,
    cfg: HmcConfig,
    rng: np.random.Generator,
    step_size: Optional[float] = None,
):
    """Run n_burn + n_keep Metropolis-corrected HMC iterations from eps_init.

    `eps_init` must be the eps recorded with the draw that produced z (or
    any other exact draw from q(eps|z)); the chain then starts at
    stationarity. Returns (samples, info) where samples is an
    (n_keep, eps_dim) array of the final iterations' positions and info
    carries acceptance_rate, the (possibly adapted) step_size to reuse,
    and mean_abs_energy_error.

    Pass `step_size` to override the starting step, e.g. to carry the
    adapted value across training iterations.
    """
    eps_init = np.asarray(eps_init, dtype=np.float64)
    value, grad = reverse_log_target(q, z, eps_init)
    if not np.isfinite(value):
        raise NonFiniteError("reverse-conditional log-target not finite at initializer")
    state = ChainState(eps_init.copy(), value, grad)

    step = float(step_size) if step_size is not None else cfg.initial_step_size(q.eps_dim)
    kept = np.empty((cfg.n_keep, q.eps_dim))
    n_total = cfg.n_burn + cfg.n_keep
    n_accept = 0
    energy_errors = np.empty(n_total)

    for it in range(n_total):
        momentum = rng.standard_normal(q.eps_dim)
        h_start = -state.log_target + 0.5 * float(momentum @ momentum)
        proposal, momentum_out = _trajectory(
            q, z, state, momentum, cfg.leapfrog_steps, step
        )
        h_end = -proposal.log_target + 0.5 * float(momentum_out @ momentum_out)
        energy_errors[it] = abs(h_end - h_start)
        accepted = np.log(rng.uniform()) < h_start - h_end
        if accepted:
            state = proposal
            n_accept += 1
        if cfg.adapt_during_burn and it < cfg.n_burn:
            step *= 1.02 if accepted else 0.98
        if it >= cfg.n_burn:
            kept[it - cfg.n_burn] = state.position
    info = {
        "acceptance_rate": n_accept / n_total,
        "step_size": step,
        "mean_abs_energy_error": float(np.mean(energy_errors)),
    }
    return kept, info
