"""Small dense MLPs with hand-rolled forward and vector-Jacobian passes.

Everything is float64 numpy. There is no computation graph: the only
differentiation paths in the package are MLP VJPs plus closed-form
distribution gradients, which keeps the numerics easy to audit. Public
operations validate that their outputs are finite and raise instead of
letting NaN/Inf propagate.

The ReLU subgradient at exactly 0 is defined to be 0, so gradients are
deterministic functions of the inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteError, ShapeError

ACTIVATIONS = ("relu", "identity", "softplus")


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_deriv(x: np.ndarray) -> np.ndarray:
    # subgradient at 0 is 0 by convention
    return (x > 0).astype(np.float64)


def softplus(x: np.ndarray) -> np.ndarray:
    """log(1 + exp(x)), computed without overflow."""
    return np.logaddexp(0.0, x)


def softplus_deriv(x: np.ndarray) -> np.ndarray:
    return sigmoid(x)


def softplus_inv(y):
    """Inverse of softplus for y > 0: log(exp(y) - 1), stable for large y."""
    y = np.asarray(y, dtype=np.float64)
    if np.any(y <= 0):
        raise ValueError("softplus_inv requires positive input")
    return y + np.log1p(-np.exp(-y))


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


_ACT_FN = {"relu": relu, "identity": lambda x: x, "softplus": softplus}
_ACT_DERIV = {
    "relu": relu_deriv,
    "identity": lambda x: np.ones_like(x),
    "softplus": softplus_deriv,
}


def require_finite(arr, what: str) -> np.ndarray:
    """Raise NonFiniteError unless every entry of `arr` is finite."""
    arr = np.asarray(arr)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"non-finite values in {what}")
    return arr


@dataclass
class Layer:
    """One dense layer: y = act(weight @ x + bias), weight is (out, in)."""

    weight: np.ndarray
    bias: np.ndarray
    activation: str = "identity"

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weight.ndim != 2 or self.bias.ndim != 1:
            raise ShapeError("layer weight must be 2-d and bias 1-d")
        if self.weight.shape[0] != self.bias.shape[0]:
            raise ShapeError(
                f"bias length {self.bias.shape[0]} != weight rows {self.weight.shape[0]}"
            )
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]


@dataclass
class MlpParams:
    """A stack of dense layers with chained dimensions."""

    layers: list[Layer] = field(default_factory=list)

    def __post_init__(self):
        if not self.layers:
            raise ValueError("MlpParams needs at least one layer")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.out_dim != nxt.in_dim:
                raise ShapeError(
                    f"layer dims do not chain: {prev.out_dim} -> {nxt.in_dim}"
                )

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    def copy(self) -> "MlpParams":
        return MlpParams(
            [Layer(l.weight.copy(), l.bias.copy(), l.activation) for l in self.layers]
        )


def mlp_init(sizes, rng, hidden_activation="relu", output_activation="identity") -> MlpParams:
    """Xavier-uniform weights, zero biases; deterministic given `rng`.

    `sizes` lists the layer widths, e.g. (3, 50, 50, 2) for two hidden layers.
    """
    if len(sizes) < 2:
        raise ValueError("need at least input and output sizes")
    layers = []
    for k, (fan_in, fan_out) in enumerate(zip(sizes, sizes[1:])):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weight = rng.uniform(-limit, limit, size=(fan_out, fan_in))
        act = output_activation if k == len(sizes) - 2 else hidden_activation
        layers.append(Layer(weight, np.zeros(fan_out), act))
    return MlpParams(layers)


def zeros_like_params(params: MlpParams) -> MlpParams:
    return MlpParams(
        [
            Layer(np.zeros_like(l.weight), np.zeros_like(l.bias), l.activation)
            for l in params.layers
        ]
    )


def _check_input(params: MlpParams, x: np.ndarray, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2) or x.shape[-1] != params.in_dim:
        raise ShapeError(
            f"{what} has shape {x.shape}, expected last dim {params.in_dim}"
        )
    return x


def mlp_forward(params: MlpParams, x: np.ndarray) -> np.ndarray:
    """Forward pass. `x` is (in,) or a batch (n, in); output matches.

    Pure: identical inputs give bit-identical outputs.
    """
    x = _check_input(params, x, "input")
    a = x
    for layer in params.layers:
        pre = a @ layer.weight.T + layer.bias
        a = _ACT_FN[layer.activation](pre)
    return require_finite(a, "mlp_forward output")


def mlp_vjp(params: MlpParams, x: np.ndarray, upstream: np.ndarray):
    """Vector-Jacobian products of the MLP output against `upstream`.

    For batched `x` (n, in) with `upstream` (n, out), parameter gradients are
    summed over the batch and the returned input gradient is (n, in).

    Returns (param_grads: MlpParams, input_grad: ndarray).
    """
    x = _check_input(params, x, "input")
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != x.shape[:-1] + (params.out_dim,):
        raise ShapeError(
            f"upstream has shape {upstream.shape}, expected {(*x.shape[:-1], params.out_dim)}"
        )

    # forward, caching inputs and pre-activations per layer
    inputs, pres = [], []
    a = x
    for layer in params.layers:
        inputs.append(a)
        pre = a @ layer.weight.T + layer.bias
        pres.append(pre)
        a = _ACT_FN[layer.activation](pre)

    grads = zeros_like_params(params)
    g = upstream
    for layer, glayer, a_in, pre in zip(
        reversed(params.layers), reversed(grads.layers), reversed(inputs), reversed(pres)
    ):
        g = g * _ACT_DERIV[layer.activation](pre)
        if g.ndim == 1:
            glayer.weight[...] = np.outer(g, a_in)
            glayer.bias[...] = g
        else:
            glayer.weight[...] = g.T @ a_in
            glayer.bias[...] = g.sum(axis=0)
        g = g @ layer.weight

    require_finite(g, "mlp_vjp input gradient")
    for glayer in grads.layers:
        require_finite(glayer.weight, "mlp_vjp weight gradient")
    return grads, g


def linear_collapse(params: MlpParams):
    """Collapse a purely linear MLP (all identity activations) to (W, b).

    Raises ValueError when any layer is nonlinear. Used by the closed-form
    oracles that require a linear-Gaussian family.
    """
    for layer in params.layers:
        if layer.activation != "identity":
            raise ValueError("network is not linear: activation "
                             f"{layer.activation!r} present")
    W = np.eye(params.in_dim)
    b = np.zeros(params.in_dim)
    for layer in params.layers:
        b = layer.weight @ b + layer.bias
        W = layer.weight @ W
    return W, b


def finite_difference_check(f, x, analytic_grad, step: float = 1e-5) -> float:
    """Max relative error between `analytic_grad` and central differences of `f`.

    The error per coordinate is |analytic - fd| / max(1, |fd|); the max over
    coordinates is returned. `f` must evaluate finitely at x +- step*e_i.
    """
    x = np.asarray(x, dtype=np.float64)
    analytic_grad = np.asarray(analytic_grad, dtype=np.float64)
    if analytic_grad.shape != x.shape:
        raise ShapeError("analytic gradient shape must match x")
    flat = x.ravel()
    fd = np.empty_like(flat)
    for i in range(flat.size):
        xp = flat.copy()
        xm = flat.copy()
        xp[i] += step
        xm[i] -= step
        fp = float(f(xp.reshape(x.shape)))
        fm = float(f(xm.reshape(x.shape)))
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NonFiniteError("non-finite function value in finite differences")
        fd[i] = (fp - fm) / (2.0 * step)
    fd = fd.reshape(x.shape)
    denom = np.maximum(1.0, np.abs(fd))
    return float(np.max(np.abs(analytic_grad - fd) / denom))
