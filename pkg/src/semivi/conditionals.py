"""Reparameterizable conditional distributions q(z | eps).

The two contracts every conditional satisfies: sampling via a deterministic
map z = h(u; eps) of parameter-free noise u, and an evaluable gradient of
the log-density with respect to z. The diagonal Gaussian is the workhorse;
an exponential-family form is provided for conditionals specified through
sufficient statistics and a natural parameter.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ShapeError
from .nn import require_finite

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class GaussianCond:
    """Diagonal Gaussian N(mean, diag(scale^2)); scale is the stddev vector."""

    mean: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.scale = np.asarray(self.scale, dtype=np.float64)
        if self.mean.shape[-1] != self.scale.shape[-1]:
            raise ShapeError("mean and scale dims differ")
        if np.any(self.scale <= 0):
            raise ValueError("scale must be strictly positive")

    @property
    def dim(self) -> int:
        return self.mean.shape[-1]


def reparameterize(cond: GaussianCond, u: np.ndarray) -> np.ndarray:
    """Location-scale map z = mean + scale * u (elementwise)."""
    u = np.asarray(u, dtype=np.float64)
    if u.shape[-1] != cond.dim:
        raise ShapeError(f"noise dim {u.shape[-1]} != conditional dim {cond.dim}")
    return cond.mean + cond.scale * u


def log_density(cond: GaussianCond, z: np.ndarray) -> float:
    """Exact diagonal-Gaussian log-density at z.

    Batched means are supported: with mean (n, d) and z (d,), returns (n,).
    """
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1] != cond.dim:
        raise ShapeError(f"z dim {z.shape[-1]} != conditional dim {cond.dim}")
    resid = (z - cond.mean) / cond.scale
    out = -0.5 * np.sum(resid**2 + LOG_2PI + 2.0 * np.log(cond.scale), axis=-1)
    require_finite(out, "Gaussian log-density")
    return float(out) if np.ndim(out) == 0 else out


def grad_logdensity_z(cond: GaussianCond, z: np.ndarray) -> np.ndarray:
    """d/dz log N(z | mean, diag(scale^2)) = -(z - mean) / scale^2."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1] != cond.dim:
        raise ShapeError(f"z dim {z.shape[-1]} != conditional dim {cond.dim}")
    return -(z - cond.mean) / cond.scale**2


@dataclass
class ExpFamCond:
    """Unnormalized exponential-family conditional exp(t(z)' eta).

    `suff_stats` maps z (d,) to t(z) (m,); `suff_stats_jac` returns the
    (m, d) Jacobian of t at z. `in_domain` optionally checks that eta is
    admissible for the family; `in_support` optionally checks z.
    """

    natural_param: np.ndarray
    suff_stats: Callable[[np.ndarray], np.ndarray]
    suff_stats_jac: Callable[[np.ndarray], np.ndarray]
    in_domain: Optional[Callable[[np.ndarray], bool]] = None
    in_support: Optional[Callable[[np.ndarray], bool]] = None

    def __post_init__(self):
        self.natural_param = np.asarray(self.natural_param, dtype=np.float64)
        if self.in_domain is not None and not self.in_domain(self.natural_param):
            raise ValueError("natural parameter outside the family's domain")


def expfam_grad_logdensity_z(cond: ExpFamCond, z: np.ndarray) -> np.ndarray:
    """d/dz [t(z)' eta] = J_t(z)' eta; the log-normalizer does not depend on z."""
    z = np.asarray(z, dtype=np.float64)
    if cond.in_support is not None and not cond.in_support(z):
        raise ValueError("z outside the support of the conditional")
    jac = np.asarray(cond.suff_stats_jac(z), dtype=np.float64)
    eta = cond.natural_param
    if jac.shape != (eta.shape[0], z.shape[0]):
        raise ShapeError(
            f"sufficient-statistics Jacobian has shape {jac.shape}, "
            f"expected {(eta.shape[0], z.shape[0])}"
        )
    return jac.T @ eta


def gaussian_natural_form(cond: GaussianCond) -> ExpFamCond:
    """Rewrite a diagonal Gaussian with t(z) = (z, z^2) and matching eta."""
    var = cond.scale**2
    eta = np.concatenate([cond.mean / var, -0.5 / var])
    d = cond.dim

    def t(z):
        return np.concatenate([z, z**2])

    def t_jac(z):
        return np.vstack([np.eye(d), np.diag(2.0 * z)])

    return ExpFamCond(eta, t, t_jac)


def sample_noise(dim: int, rng: np.random.Generator) -> np.ndarray:
    """iid standard-normal noise vector of length `dim`."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    return rng.standard_normal(dim)
