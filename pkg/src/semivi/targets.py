"""Inference targets: log p(x, z) and its z-gradient.

Includes the three synthetic 2-d densities used for the toy fits, simple
Gaussian targets for oracle tests, a conjugate location model whose
evidence is known in closed form, and Bayesian multinomial logistic
regression with minibatch scaling.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from .conditionals import LOG_2PI
from .datasets import LabeledDataset
from .errors import ShapeError
from .family import SemiImplicitQ, sample_many


class TargetModel:
    """Interface: a log-joint over latents z and its gradient.

    `n_total` is the full-data size used for minibatch scaling; synthetic
    targets set it to 0 and ignore the batch argument.
    """

    z_dim: int
    n_total: int = 0

    def log_joint(self, z: np.ndarray, batch: Optional[LabeledDataset] = None) -> float:
        raise NotImplementedError

    def grad_z_log_joint(
        self, z: np.ndarray, batch: Optional[LabeledDataset] = None
    ) -> np.ndarray:
        raise NotImplementedError


def _mvn_logpdf(y: np.ndarray, prec: np.ndarray, log_det_cov: float) -> float:
    return float(-0.5 * (y @ prec @ y) - 0.5 * (2.0 * LOG_2PI + log_det_cov))


_BANANA_COV = np.array([[1.0, 0.9], [0.9, 1.0]])
_BANANA_PREC = np.linalg.inv(_BANANA_COV)
_BANANA_LOGDET = float(np.linalg.slogdet(_BANANA_COV)[1])


def banana_log_density(z: np.ndarray) -> float:
    """Gaussian density evaluated after the unit-Jacobian bend
    (z1, z2) -> (z1, z2 + z1^2 + 1)."""
    z = _check_2d(z)
    y = np.array([z[0], z[1] + z[0] ** 2 + 1.0])
    return _mvn_logpdf(y, _BANANA_PREC, _BANANA_LOGDET)


def banana_grad(z: np.ndarray) -> np.ndarray:
    z = _check_2d(z)
    y = np.array([z[0], z[1] + z[0] ** 2 + 1.0])
    gy = -_BANANA_PREC @ y
    # chain rule through the bend: dy2/dz1 = 2 z1
    return np.array([gy[0] + 2.0 * z[0] * gy[1], gy[1]])


_MULTIMODAL_MEANS = np.array([[-2.0, 0.0], [2.0, 0.0]])


def multimodal_log_density(z: np.ndarray) -> float:
    """Equal two-component Gaussian mixture with unit covariances at (+-2, 0)."""
    z = _check_2d(z)
    comp = -0.5 * np.sum((z - _MULTIMODAL_MEANS) ** 2, axis=1) - LOG_2PI
    return float(logsumexp(comp) - np.log(2.0))


def multimodal_grad(z: np.ndarray) -> np.ndarray:
    z = _check_2d(z)
    comp = -0.5 * np.sum((z - _MULTIMODAL_MEANS) ** 2, axis=1)
    w = np.exp(comp - logsumexp(comp))
    return -(w[:, None] * (z - _MULTIMODAL_MEANS)).sum(axis=0)


_X_COVS = np.array([[[2.0, 1.8], [1.8, 2.0]], [[2.0, -1.8], [-1.8, 2.0]]])
_X_PRECS = np.linalg.inv(_X_COVS)
_X_LOGDET = float(np.linalg.slogdet(_X_COVS[0])[1])


def xshaped_log_density(z: np.ndarray) -> float:
    """Equal mixture of two anti-correlated zero-mean Gaussians."""
    z = _check_2d(z)
    quad = np.einsum("i,kij,j->k", z, _X_PRECS, z)
    comp = -0.5 * quad - LOG_2PI - 0.5 * _X_LOGDET
    return float(logsumexp(comp) - np.log(2.0))


def xshaped_grad(z: np.ndarray) -> np.ndarray:
    z = _check_2d(z)
    quad = np.einsum("i,kij,j->k", z, _X_PRECS, z)
    w = np.exp(-0.5 * quad - logsumexp(-0.5 * quad))
    return -(w[:, None] * (_X_PRECS @ z)).sum(axis=0)


def _check_2d(z) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (2,):
        raise ShapeError(f"expected a 2-vector, got shape {z.shape}")
    return z


class _Synthetic2D(TargetModel):
    z_dim = 2
    n_total = 0

    def __init__(self, log_density, grad):
        self._log_density = log_density
        self._grad = grad

    def log_joint(self, z, batch=None) -> float:
        return self._log_density(z)

    def grad_z_log_joint(self, z, batch=None) -> np.ndarray:
        return self._grad(z)


class Banana(_Synthetic2D):
    def __init__(self):
        super().__init__(banana_log_density, banana_grad)


class Multimodal(_Synthetic2D):
    def __init__(self):
        super().__init__(multimodal_log_density, multimodal_grad)


class XShaped(_Synthetic2D):
    def __init__(self):
        super().__init__(xshaped_log_density, xshaped_grad)


TOY_TARGETS = {"banana": Banana, "multimodal": Multimodal, "xshaped": XShaped}


class GaussianTarget(TargetModel):
    """Diagonal Gaussian target, normalized; handy as a matched-family oracle."""

    n_total = 0

    def __init__(self, mean, scale):
        self.mean = np.asarray(mean, dtype=np.float64)
        self.scale = np.asarray(scale, dtype=np.float64)
        if self.mean.shape != self.scale.shape or self.mean.ndim != 1:
            raise ShapeError("mean and scale must be 1-d with equal length")
        if np.any(self.scale <= 0):
            raise ValueError("scale must be positive")
        self.z_dim = self.mean.shape[0]

    def log_joint(self, z, batch=None) -> float:
        z = np.asarray(z, dtype=np.float64)
        resid = (z - self.mean) / self.scale
        return float(-0.5 * np.sum(resid**2 + LOG_2PI + 2.0 * np.log(self.scale)))

    def grad_z_log_joint(self, z, batch=None) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        return -(z - self.mean) / self.scale**2


class ConjugateLocationModel(TargetModel):
    """p(x, z) = N(z | 0, 1) N(x | z, 1) for a scalar observation x.

    The evidence is N(x | 0, 2) and the posterior N(x/2, 1/2), which makes
    this the reference model for the importance-sampling estimator tests.
    """

    z_dim = 1
    n_total = 0

    def __init__(self, x: float):
        self.x = float(x)

    def log_joint(self, z, batch=None) -> float:
        z = float(np.asarray(z).reshape(()))
        return float(-0.5 * (z**2 + (self.x - z) ** 2) - LOG_2PI)

    def grad_z_log_joint(self, z, batch=None) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        return -z + (self.x - z)

    def log_evidence(self) -> float:
        return float(-0.5 * (self.x**2 / 2.0) - 0.5 * (LOG_2PI + np.log(2.0)))


class MultinomialLogisticRegression(TargetModel):
    """Bayesian softmax regression: standard-normal prior over all weights
    and intercepts, categorical likelihood with logits x' w_k + b_k.

    Latent packing: the first K*D entries are the weight matrix (K, D) in
    row-major order, the last K entries the intercepts. Minibatch
    evaluations scale the likelihood term by n_total / batch_size so the
    stochastic log-joint is unbiased for the full-data one.
    """

    def __init__(self, train: LabeledDataset):
        self.train = train
        self.K = train.K
        self.D = train.d
        self.z_dim = self.K * (self.D + 1)
        self.n_total = train.n

    def unpack(self, z: np.ndarray):
        z = np.asarray(z, dtype=np.float64)
        if z.shape != (self.z_dim,):
            raise ShapeError(f"z must have shape ({self.z_dim},)")
        W = z[: self.K * self.D].reshape(self.K, self.D)
        b = z[self.K * self.D :]
        return W, b

    def _batch(self, batch: Optional[LabeledDataset]) -> LabeledDataset:
        if batch is None:
            return self.train
        if batch.n == 0:
            raise ValueError("batch must be nonempty")
        if batch.d != self.D or batch.K > self.K:
            raise ShapeError("batch is incompatible with the model dimensions")
        return batch

    def log_joint(self, z, batch=None) -> float:
        W, b = self.unpack(z)
        data = self._batch(batch)
        scale = self.n_total / data.n
        logits = data.features @ W.T + b
        norm = logsumexp(logits, axis=1)
        loglik = logits[np.arange(data.n), data.labels] - norm
        z = np.asarray(z, dtype=np.float64)
        prior = -0.5 * float(z @ z) - 0.5 * self.z_dim * LOG_2PI
        return prior + scale * float(loglik.sum())

    def grad_z_log_joint(self, z, batch=None) -> np.ndarray:
        W, b = self.unpack(z)
        data = self._batch(batch)
        scale = self.n_total / data.n
        logits = data.features @ W.T + b
        probs = np.exp(logits - logsumexp(logits, axis=1, keepdims=True))
        resid = -probs
        resid[np.arange(data.n), data.labels] += 1.0
        grad_W = scale * resid.T @ data.features
        grad_b = scale * resid.sum(axis=0)
        return np.concatenate([grad_W.ravel(), grad_b]) - np.asarray(z, dtype=np.float64)

    def loglik_per_point(self, z: np.ndarray, data: LabeledDataset) -> np.ndarray:
        """log p(y_n | x_n, z) for each row of `data` (no prior, no scaling)."""
        W, b = self.unpack(z)
        logits = data.features @ W.T + b
        return logits[np.arange(data.n), data.labels] - logsumexp(logits, axis=1)


def predictive_loglik_from_samples(
    model: MultinomialLogisticRegression, zs: np.ndarray, test: LabeledDataset
) -> np.ndarray:
    """Per-test-point log predictive likelihood from given posterior samples.

    Returns log( (1/S) sum_s p(y_n | x_n, z_s) ) for every test point,
    computed with log-sum-exp over the samples.
    """
    zs = np.asarray(zs, dtype=np.float64)
    if zs.ndim != 2:
        raise ShapeError("zs must be (n_samples, z_dim)")
    if test.n == 0:
        raise ValueError("test set must be nonempty")
    per_sample = np.empty((zs.shape[0], test.n))
    for s, z in enumerate(zs):
        per_sample[s] = model.loglik_per_point(z, test)
    return logsumexp(per_sample, axis=0) - np.log(zs.shape[0])


def mlr_predictive_loglik(
    model: MultinomialLogisticRegression,
    q: SemiImplicitQ,
    test: LabeledDataset,
    n_samples: int,
    rng: np.random.Generator,
) -> float:
    """Mean test log predictive likelihood under q (n_samples posterior draws)."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    _, _, zs = sample_many(q, n_samples, rng)
    return float(np.mean(predictive_loglik_from_samples(model, zs, test)))
