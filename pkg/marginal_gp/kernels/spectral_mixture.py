"""Spectral mixture kernel: hyperparameter containers, covariance and spectral density.

The kernel of a Q-component mixture over D-dimensional inputs is

    k(tau) = sum_q w_q cos(2 pi tau . mu_q) prod_d exp(-2 pi^2 tau_d^2 sigma_qd^2)

whose spectral density is a symmetric mixture of Gaussian pairs. All
frequencies are in cycles per input unit.

Flat vectors use a block layout shared by the priors, the samplers and the
optimiser: ``[w (Q), mu (Q*D, component-major), sigma (Q*D), noise (1)]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import norm

TWO_PI = 2.0 * math.pi
TWO_PI_SQ = 2.0 * math.pi**2


def _frozen_vector(values: Iterable[float] | float) -> np.ndarray:
    array = np.atleast_1d(np.asarray(values, dtype=float)).copy()
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class SpectralComponent:
    """One Gaussian pair of the spectral density.

    Failure Modes:
        - Non-positive weight or bandwidth, negative or non-finite frequency:
          ``ValueError`` at construction.
        - Frequency and bandwidth vectors of different lengths: ``ValueError``.
    """

    weight: float
    mean_freq: np.ndarray
    bandwidth: np.ndarray

    def __post_init__(self) -> None:
        mean_freq = _frozen_vector(self.mean_freq)
        bandwidth = _frozen_vector(self.bandwidth)
        object.__setattr__(self, "weight", float(self.weight))
        object.__setattr__(self, "mean_freq", mean_freq)
        object.__setattr__(self, "bandwidth", bandwidth)
        if mean_freq.shape != bandwidth.shape:
            raise ValueError("mean_freq and bandwidth must have the same length")
        if not (self.weight > 0 and math.isfinite(self.weight)):
            raise ValueError(f"weight must be positive and finite, got {self.weight}")
        if not np.all(np.isfinite(mean_freq)) or np.any(mean_freq < 0):
            raise ValueError("mean_freq entries must be finite and non-negative")
        if not np.all(np.isfinite(bandwidth)) or np.any(bandwidth <= 0):
            raise ValueError("bandwidth entries must be finite and positive")

    @property
    def dims(self) -> int:
        return int(self.mean_freq.shape[0])


@dataclass(frozen=True, eq=False)
class SmHyperParams:
    """Full hyperparameter set: Q spectral components plus the noise variance."""

    components: tuple[SpectralComponent, ...]
    noise_variance: float

    def __post_init__(self) -> None:
        components = tuple(self.components)
        object.__setattr__(self, "components", components)
        object.__setattr__(self, "noise_variance", float(self.noise_variance))
        if not components:
            raise ValueError("at least one spectral component is required")
        dims = {component.dims for component in components}
        if len(dims) != 1:
            raise ValueError("all components must share the input dimension")
        if not (self.noise_variance > 0 and math.isfinite(self.noise_variance)):
            raise ValueError(f"noise_variance must be positive and finite, got {self.noise_variance}")

    @property
    def q(self) -> int:
        return len(self.components)

    @property
    def dims(self) -> int:
        return self.components[0].dims

    @property
    def weights(self) -> np.ndarray:
        return np.array([component.weight for component in self.components])

    @property
    def mean_freqs(self) -> np.ndarray:
        """Frequencies as a (Q, D) array."""
        return np.stack([component.mean_freq for component in self.components])

    @property
    def bandwidths(self) -> np.ndarray:
        """Bandwidths as a (Q, D) array."""
        return np.stack([component.bandwidth for component in self.components])

    @property
    def signal_variance(self) -> float:
        """k(0), the sum of the component weights."""
        return float(np.sum(self.weights))

    @classmethod
    def from_arrays(
        cls,
        weights: Sequence[float] | np.ndarray,
        mean_freqs: Sequence[Sequence[float]] | np.ndarray,
        bandwidths: Sequence[Sequence[float]] | np.ndarray,
        noise_variance: float,
    ) -> "SmHyperParams":
        weights = np.atleast_1d(np.asarray(weights, dtype=float))
        q = weights.shape[0]
        mean_freqs = np.asarray(mean_freqs, dtype=float).reshape(q, -1)
        bandwidths = np.asarray(bandwidths, dtype=float).reshape(q, -1)
        components = tuple(
            SpectralComponent(weight=weights[i], mean_freq=mean_freqs[i], bandwidth=bandwidths[i])
            for i in range(q)
        )
        return cls(components=components, noise_variance=noise_variance)

    def to_vector(self) -> np.ndarray:
        """Flatten into the block layout ``[w, mu, sigma, noise]``."""
        return np.concatenate(
            [
                self.weights,
                self.mean_freqs.ravel(),
                self.bandwidths.ravel(),
                [self.noise_variance],
            ]
        )

    @classmethod
    def from_vector(cls, vector: np.ndarray, q: int, dims: int) -> "SmHyperParams":
        vector = np.asarray(vector, dtype=float)
        expected = vector_length(q, dims)
        if vector.shape != (expected,):
            raise ValueError(f"expected a vector of length {expected}, got shape {vector.shape}")
        qd = q * dims
        return cls.from_arrays(
            weights=vector[:q],
            mean_freqs=vector[q : q + qd].reshape(q, dims),
            bandwidths=vector[q + qd : q + 2 * qd].reshape(q, dims),
            noise_variance=vector[-1],
        )

    def permuted(self, order: Sequence[int]) -> "SmHyperParams":
        return SmHyperParams(
            components=tuple(self.components[i] for i in order),
            noise_variance=self.noise_variance,
        )

    def sorted_by_frequency(self) -> "SmHyperParams":
        """Components in ascending order of first-dimension frequency."""
        order = np.argsort(self.mean_freqs[:, 0], kind="stable")
        return self.permuted([int(i) for i in order])


def vector_length(q: int, dims: int) -> int:
    """Number of scalar hyperparameters: Q (1 + 2D) + 1."""
    return q * (1 + 2 * dims) + 1


def _component_terms(tau: np.ndarray, params: SmHyperParams) -> tuple[np.ndarray, np.ndarray]:
    """Per-component phase and envelope for differences of shape (..., D)."""
    mu = params.mean_freqs
    sigma = params.bandwidths
    phase = TWO_PI * np.einsum("...d,qd->q...", tau, mu)
    envelope = np.exp(-TWO_PI_SQ * np.einsum("...d,qd->q...", tau**2, sigma**2))
    return phase, envelope


def sm_kernel(tau: Sequence[float] | np.ndarray, params: SmHyperParams) -> float:
    """Evaluate k(tau) for a single D-vector of input differences."""

    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    if tau.shape != (params.dims,):
        raise ValueError(f"tau must have length {params.dims}")
    if not np.all(np.isfinite(tau)):
        raise ValueError("tau must be finite")
    phase, envelope = _component_terms(tau, params)
    return float(np.sum(params.weights * np.cos(phase) * envelope))


def spectral_density(nu: float | np.ndarray, params: SmHyperParams) -> float | np.ndarray:
    """One-dimensional spectral density S(nu) of the mixture.

    Failure Modes:
        - Multi-dimensional params: ``ValueError``; density plots are 1-D only.
    """

    if params.dims != 1:
        raise ValueError("spectral_density is defined for one-dimensional kernels only")
    nu_arr = np.asarray(nu, dtype=float)
    total = np.zeros_like(nu_arr)
    for component in params.components:
        mu = component.mean_freq[0]
        sigma = component.bandwidth[0]
        total = total + 0.5 * component.weight * (
            norm.pdf(nu_arr, loc=mu, scale=sigma) + norm.pdf(nu_arr, loc=-mu, scale=sigma)
        )
    if np.ndim(total) == 0:
        return float(total)
    return total


def pairwise_differences(X1: np.ndarray, X2: np.ndarray) -> np.ndarray:
    """Differences x1_i - x2_j as an (N1, N2, D) array."""
    X1 = np.atleast_2d(np.asarray(X1, dtype=float))
    X2 = np.atleast_2d(np.asarray(X2, dtype=float))
    if X1.shape[1] != X2.shape[1]:
        raise ValueError("input dimensions do not match")
    return X1[:, None, :] - X2[None, :, :]


def cross_covariance(X1: np.ndarray, X2: np.ndarray, params: SmHyperParams) -> np.ndarray:
    """Covariance block K[i, j] = k(x1_i - x2_j)."""

    tau = pairwise_differences(X1, X2)
    if tau.shape[2] != params.dims:
        raise ValueError(f"inputs have {tau.shape[2]} dimensions, kernel has {params.dims}")
    phase, envelope = _component_terms(tau, params)
    return np.einsum("q,qij->ij", params.weights, np.cos(phase) * envelope)


def gram_matrix(X: np.ndarray, params: SmHyperParams) -> np.ndarray:
    """Symmetric N x N Gram matrix of the training inputs."""

    X = np.atleast_2d(np.asarray(X, dtype=float))
    if not np.all(np.isfinite(X)):
        raise ValueError("inputs must be finite")
    K = cross_covariance(X, X, params)
    return 0.5 * (K + K.T)


def gram_with_log_gradients(
    X: np.ndarray, params: SmHyperParams
) -> tuple[np.ndarray, np.ndarray]:
    """Gram matrix and its derivatives with respect to the log kernel hyperparameters.

    Returns ``(K, dK)`` with ``dK`` of shape (Q (1 + 2D), N, N) following the
    block layout, noise excluded. The cosine derivative is analytic.
    """

    X = np.atleast_2d(np.asarray(X, dtype=float))
    tau = pairwise_differences(X, X)
    q, dims = params.q, params.dims
    weights = params.weights
    mu = params.mean_freqs
    sigma = params.bandwidths
    phase, envelope = _component_terms(tau, params)
    cos_phase = np.cos(phase)
    sin_phase = np.sin(phase)
    per_component = weights[:, None, None] * cos_phase * envelope
    K = per_component.sum(axis=0)

    n = X.shape[0]
    dK = np.empty((vector_length(q, dims) - 1, n, n))
    dK[:q] = per_component
    qd = q * dims
    for i in range(q):
        for d in range(dims):
            tau_d = tau[:, :, d]
            # d/dlog(mu) of cos(2 pi tau.mu) = -sin(.) 2 pi tau_d mu_d
            dK[q + i * dims + d] = (
                -weights[i] * envelope[i] * sin_phase[i] * (TWO_PI * tau_d * mu[i, d])
            )
            # d/dlog(sigma) of exp(-2 pi^2 tau_d^2 sigma_d^2) = -4 pi^2 tau_d^2 sigma_d^2 exp(.)
            dK[q + qd + i * dims + d] = per_component[i] * (
                -2.0 * TWO_PI_SQ * tau_d**2 * sigma[i, d] ** 2
            )
    return K, dK


__all__ = [
    "SmHyperParams",
    "SpectralComponent",
    "cross_covariance",
    "gram_matrix",
    "gram_with_log_gradients",
    "pairwise_differences",
    "sm_kernel",
    "spectral_density",
    "vector_length",
]
