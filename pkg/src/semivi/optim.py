"""RMSProp variant with a 1 + sqrt(G) denominator and stepped learning-rate decay.

Per-parameter update on the gradient-ascent direction g:

    G <- 0.9 G + 0.1 g^2
    rho = eta_eff / (1 + sqrt(G)),  eta_eff = eta * decay_factor^(t // decay_every)
    p <- p + rho * g

The +1 in the denominator regularizes on its own, so no epsilon is added
inside the square root. Network parameters and the conditional-scale
parameters use separate base learning rates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError


@dataclass
class RmsPropState:
    """Accumulators and learning-rate bookkeeping; one G per parameter array."""

    G: list
    base_eta: list
    decay_every: int = 3000
    decay_factor: float = 0.9
    t: int = 0

    def effective_eta(self) -> list:
        factor = self.decay_factor ** (self.t // self.decay_every)
        return [eta * factor for eta in self.base_eta]


def rmsprop_init(
    params: list,
    groups: list,
    eta_net: float = 0.01,
    eta_scale: float = 0.002,
    decay_every: int = 3000,
    decay_factor: float = 0.9,
) -> RmsPropState:
    """State for a parameter list with per-array group labels ('net' | 'scale')."""
    if len(params) != len(groups):
        raise ShapeError("params and groups must have equal length")
    etas = []
    for g in groups:
        if g == "net":
            etas.append(eta_net)
        elif g == "scale":
            etas.append(eta_scale)
        else:
            raise ValueError(f"unknown parameter group {g!r}")
    return RmsPropState(
        G=[np.zeros_like(np.asarray(p, dtype=np.float64)) for p in params],
        base_eta=etas,
        decay_every=decay_every,
        decay_factor=decay_factor,
    )


def rmsprop_step(state: RmsPropState, params: list, grads: list) -> list:
    """One ascent step; returns the updated parameter arrays.

    Mutates the accumulator and iteration counter in `state`; the input
    arrays are left untouched.
    """
    if len(params) != len(state.G) or len(grads) != len(state.G):
        raise ShapeError("parameter/gradient list length mismatch")
    etas = state.effective_eta()
    new_params = []
    for p, g, G, eta in zip(params, grads, state.G, etas):
        p = np.asarray(p, dtype=np.float64)
        g = np.asarray(g, dtype=np.float64)
        if p.shape != g.shape:
            raise ShapeError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        G[...] = 0.9 * G + 0.1 * g**2
        rho = eta / (1.0 + np.sqrt(G))
        new_params.append(p + rho * g)
    state.t += 1
    return new_params
