"""The semi-implicit variational family q(z) = integral q(z|eps) q(eps) d eps.

A draw is hierarchical: eps ~ N(0, I), then z ~ q(z|eps) where the
conditional is a diagonal Gaussian whose mean is a network function of eps
and whose scale is a free positive vector shared across eps. The marginal
density of z is intractable; `marginal_logdensity_estimate` gives the
finite-sample log-mean-density estimate used by the surrogate bound and by
evaluation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .conditionals import GaussianCond, log_density, reparameterize
from .errors import ShapeError
from .nn import Layer, MlpParams, mlp_forward, mlp_init, softplus, softplus_inv

CHECKPOINT_VERSION = 1


@dataclass
class SemiImplicitQ:
    """Variational family: mixing dim, conditional-mean network, raw scales.

    `scale_raw` is unconstrained; the conditional stddev is softplus(scale_raw),
    which keeps the scale positive under any gradient update.
    """

    eps_dim: int
    z_dim: int
    cond_net: MlpParams
    scale_raw: np.ndarray

    def __post_init__(self):
        self.scale_raw = np.asarray(self.scale_raw, dtype=np.float64)
        if self.cond_net.in_dim != self.eps_dim:
            raise ShapeError(
                f"network input dim {self.cond_net.in_dim} != eps_dim {self.eps_dim}"
            )
        if self.cond_net.out_dim != self.z_dim:
            raise ShapeError(
                f"network output dim {self.cond_net.out_dim} != z_dim {self.z_dim}"
            )
        if self.scale_raw.shape != (self.z_dim,):
            raise ShapeError(f"scale_raw must have shape ({self.z_dim},)")

    @property
    def scale(self) -> np.ndarray:
        return softplus(self.scale_raw)

    def copy(self) -> "SemiImplicitQ":
        return SemiImplicitQ(
            self.eps_dim, self.z_dim, self.cond_net.copy(), self.scale_raw.copy()
        )


@dataclass(frozen=True)
class DrawRecord:
    """One joint draw (eps, u, z) with z = mean(eps) + scale * u exactly."""

    eps: np.ndarray
    u: np.ndarray
    z: np.ndarray


def make_family(
    eps_dim: int,
    z_dim: int,
    hidden,
    rng: np.random.Generator,
    init_scale: float = 1.0,
) -> SemiImplicitQ:
    """Fresh family with Xavier-initialized mean network and sigma = init_scale."""
    sizes = (eps_dim, *hidden, z_dim)
    net = mlp_init(sizes, rng)
    scale_raw = np.full(z_dim, float(softplus_inv(init_scale)))
    return SemiImplicitQ(eps_dim, z_dim, net, scale_raw)


def make_constant_family(
    eps_dim: int, z_dim: int, init_scale: float = 1.0
) -> SemiImplicitQ:
    """Degenerate-mixing family: a single zero-weight linear layer.

    The conditional mean is the bias vector regardless of eps, so the
    marginal is the explicit Gaussian N(bias, diag(scale^2)). Training this
    family as an explicit baseline must keep the weights frozen at zero.
    """
    net = MlpParams([Layer(np.zeros((z_dim, eps_dim)), np.zeros(z_dim), "identity")])
    scale_raw = np.full(z_dim, float(softplus_inv(init_scale)))
    return SemiImplicitQ(eps_dim, z_dim, net, scale_raw)


def cond_params(q: SemiImplicitQ, eps: np.ndarray) -> GaussianCond:
    """Conditional parameters at eps: mean from the network, shared scale."""
    mean = mlp_forward(q.cond_net, eps)
    return GaussianCond(mean, q.scale)


def sample(q: SemiImplicitQ, rng: np.random.Generator) -> DrawRecord:
    """One hierarchical draw; the record keeps eps for reverse-conditional use."""
    eps = rng.standard_normal(q.eps_dim)
    u = rng.standard_normal(q.z_dim)
    z = reparameterize(cond_params(q, eps), u)
    return DrawRecord(eps=eps, u=u, z=z)


def sample_many(q: SemiImplicitQ, n: int, rng: np.random.Generator):
    """n joint draws as stacked arrays (eps (n, eps_dim), u, z (n, z_dim))."""
    eps = rng.standard_normal((n, q.eps_dim))
    u = rng.standard_normal((n, q.z_dim))
    mean = mlp_forward(q.cond_net, eps)
    z = mean + q.scale * u
    return eps, u, z


def conditional_logdensity_batch(
    q: SemiImplicitQ, z: np.ndarray, eps_batch: np.ndarray
) -> np.ndarray:
    """log q(z | eps_m) for each row eps_m of eps_batch."""
    means = mlp_forward(q.cond_net, eps_batch)
    return log_density(GaussianCond(means, q.scale), z)


def marginal_logdensity_estimate(
    q: SemiImplicitQ, z: np.ndarray, M: int, rng: np.random.Generator
) -> float:
    """log of the M-sample average conditional density at z.

    Computes log( (1/M) sum_m q(z | eps_m) ) with eps_m iid from q(eps),
    using log-sum-exp so realistic dimensions do not underflow. The
    estimate lower-bounds log q(z) in expectation (Jensen) and converges
    as M grows.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    eps = rng.standard_normal((M, q.eps_dim))
    logs = conditional_logdensity_batch(q, z, eps)
    return float(logsumexp(logs) - np.log(M))


def save_checkpoint(q: SemiImplicitQ, path) -> None:
    """Write the family to a versioned JSON file with exact float round-trip."""
    doc = {
        "format_version": CHECKPOINT_VERSION,
        "eps_dim": q.eps_dim,
        "z_dim": q.z_dim,
        "layers": [
            {
                "weight": layer.weight.tolist(),
                "bias": layer.bias.tolist(),
                "activation": layer.activation,
            }
            for layer in q.cond_net.layers
        ],
        "scale_raw": q.scale_raw.tolist(),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_checkpoint(path) -> SemiImplicitQ:
    with open(path) as fh:
        doc = json.load(fh)
    version = doc.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version!r}")
    layers = [
        Layer(np.array(l["weight"], dtype=np.float64),
              np.array(l["bias"], dtype=np.float64),
              l["activation"])
        for l in doc["layers"]
    ]
    return SemiImplicitQ(
        eps_dim=int(doc["eps_dim"]),
        z_dim=int(doc["z_dim"]),
        cond_net=MlpParams(layers),
        scale_raw=np.array(doc["scale_raw"], dtype=np.float64),
    )


def family_arrays(q: SemiImplicitQ) -> list[np.ndarray]:
    """The family's parameter arrays in canonical order (layer W, b, ..., scale_raw)."""
    out = []
    for layer in q.cond_net.layers:
        out.append(layer.weight)
        out.append(layer.bias)
    out.append(q.scale_raw)
    return out


def family_groups(q: SemiImplicitQ) -> list[str]:
    """Learning-rate group per array in `family_arrays` order: net or scale."""
    return ["net"] * (2 * len(q.cond_net.layers)) + ["scale"]


def set_family_arrays(q: SemiImplicitQ, arrays) -> None:
    """Write updated parameter values back in `family_arrays` order."""
    expected = family_arrays(q)
    if len(arrays) != len(expected):
        raise ShapeError("parameter list length mismatch")
    for dst, src in zip(expected, arrays):
        if dst.shape != np.shape(src):
            raise ShapeError("parameter shape mismatch in update")
        dst[...] = src


def get_flat_params(q: SemiImplicitQ) -> np.ndarray:
    """All parameters concatenated into one vector (family_arrays order)."""
    return np.concatenate([a.ravel() for a in family_arrays(q)])


def set_flat_params(q: SemiImplicitQ, vec) -> None:
    """Inverse of `get_flat_params`."""
    vec = np.asarray(vec, dtype=np.float64)
    arrays = family_arrays(q)
    total = sum(a.size for a in arrays)
    if vec.shape != (total,):
        raise ShapeError(f"flat parameter vector must have length {total}")
    offset = 0
    for a in arrays:
        a[...] = vec[offset : offset + a.size].reshape(a.shape)
        offset += a.size
