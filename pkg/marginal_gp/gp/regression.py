"""Exact Gaussian-noise GP regression for a single hyperparameter setting.

Every solve goes through a jittered Cholesky factor of ``K + sigma_n^2 I``;
no explicit inverse is formed for the likelihood or the predictive mean.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular

from ..errors import FactorizationFailure
from ..kernels.spectral_mixture import (
    SmHyperParams,
    cross_covariance,
    gram_matrix,
    gram_with_log_gradients,
)
from .dataset import Dataset

LOG_2PI = math.log(2.0 * math.pi)
INITIAL_JITTER = 1e-8
MAX_JITTER = 1e-4


@dataclass(frozen=True, eq=False)
class GaussianPredictive:
    """Diagonal Gaussian predictive over noisy test targets."""

    mean: np.ndarray
    variance: np.ndarray

    def __post_init__(self) -> None:
        if self.mean.shape != self.variance.shape:
            raise ValueError("mean and variance must have the same shape")
        if np.any(self.variance <= 0):
            raise ValueError("predictive variances must be positive")


def jittered_cholesky(matrix: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor of ``matrix + jitter I``.

    The jitter starts at 1e-8 times the mean diagonal and doubles on failure
    while it stays at or below 1e-4 times the mean diagonal.

    Failure Modes:
        - Still indefinite at the largest jitter, or non-finite entries:
          ``FactorizationFailure``.
    """

    if not np.all(np.isfinite(matrix)):
        raise FactorizationFailure("covariance matrix has non-finite entries")
    scale = float(np.mean(np.diag(matrix)))
    if not scale > 0:
        raise FactorizationFailure("covariance matrix has a non-positive mean diagonal")
    identity = np.eye(matrix.shape[0])
    relative = INITIAL_JITTER
    while relative <= MAX_JITTER:
        try:
            return cholesky(matrix + relative * scale * identity, lower=True, check_finite=False)
        except LinAlgError:
            relative *= 2.0
    raise FactorizationFailure(
        f"covariance not positive definite with jitter up to {MAX_JITTER:g} x mean diagonal"
    )


def _noisy_factor(data: Dataset, params: SmHyperParams, K: np.ndarray | None = None) -> np.ndarray:
    if params.dims != data.dims:
        raise ValueError(f"kernel has {params.dims} input dimensions, data has {data.dims}")
    if K is None:
        K = gram_matrix(data.inputs, params)
    noisy = K + params.noise_variance * np.eye(data.n)
    return jittered_cholesky(noisy)


def _lml_from_factor(L: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    alpha = cho_solve((L, True), y, check_finite=False)
    value = -0.5 * float(y @ alpha) - float(np.sum(np.log(np.diag(L)))) - 0.5 * y.shape[0] * LOG_2PI
    return value, alpha


def log_marginal_likelihood(data: Dataset, params: SmHyperParams) -> float:
    """log N(y | 0, K + sigma_n^2 I) via a triangular factorisation.

    Failure Modes:
        - ``FactorizationFailure`` for pathological hyperparameters; callers
          treat the log-likelihood as ``-inf``.
    """

    L = _noisy_factor(data, params)
    value, _ = _lml_from_factor(L, data.targets)
    return value


def lml_and_gradient(data: Dataset, params: SmHyperParams) -> tuple[float, np.ndarray]:
    """Log marginal likelihood and its gradient with respect to log hyperparameters.

    The gradient follows the block layout of ``SmHyperParams.to_vector`` and
    uses ``0.5 tr((alpha alpha^T - K^-1) dK/dlog(theta))``.
    """

    if params.dims != data.dims:
        raise ValueError(f"kernel has {params.dims} input dimensions, data has {data.dims}")
    K, dK = gram_with_log_gradients(data.inputs, params)
    L = _noisy_factor(data, params, K=K)
    value, alpha = _lml_from_factor(L, data.targets)
    K_inv = cho_solve((L, True), np.eye(data.n), check_finite=False)
    inner = np.outer(alpha, alpha) - K_inv
    gradient = np.empty(dK.shape[0] + 1)
    gradient[:-1] = 0.5 * np.einsum("ij,kij->k", inner, dK)
    # dK/dlog(sigma_n^2) = sigma_n^2 I
    gradient[-1] = 0.5 * params.noise_variance * float(np.trace(inner))
    return value, gradient


def lml_gradient(data: Dataset, params: SmHyperParams) -> np.ndarray:
    """Gradient of the log marginal likelihood in log-hyperparameter space."""

    return lml_and_gradient(data, params)[1]


def posterior_predictive(data: Dataset, params: SmHyperParams, Xstar: np.ndarray) -> GaussianPredictive:
    """Predictive mean and variance of noisy targets y* at the test inputs.

    Failure Modes:
        - ``FactorizationFailure`` when the training covariance cannot be factorised.
    """

    Xstar = np.asarray(Xstar, dtype=float)
    if Xstar.ndim == 1:
        Xstar = Xstar[:, None]
    L = _noisy_factor(data, params)
    K_star = cross_covariance(data.inputs, Xstar, params)
    alpha = cho_solve((L, True), data.targets, check_finite=False)
    mean = K_star.T @ alpha
    v = solve_triangular(L, K_star, lower=True, check_finite=False)
    prior_variance = params.signal_variance + params.noise_variance
    variance = prior_variance - np.sum(v**2, axis=0)
    floor = np.finfo(float).eps * prior_variance
    variance = np.maximum(variance, floor)
    return GaussianPredictive(mean=mean, variance=variance)


__all__ = [
    "GaussianPredictive",
    "jittered_cholesky",
    "lml_and_gradient",
    "lml_gradient",
    "log_marginal_likelihood",
    "posterior_predictive",
]
