"""Equal-weight mixture of per-sample Gaussian predictives and its scores.

Component moments are held in normalised units; every score and interval
is reported in original units through the dataset's normalisation record.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from ..errors import AllComponentsFailed, FactorizationFailure
from ..gp.dataset import Dataset, NormRecord
from ..gp.regression import GaussianPredictive, posterior_predictive
from ..kernels.spectral_mixture import SmHyperParams
from ..logging_utils import log_event

LOG_2PI = math.log(2.0 * math.pi)
WEIGHT_TOLERANCE = 1e-10


@dataclass(frozen=True, eq=False)
class PredictiveMixture:
    """Per test point, M Gaussian components sharing the weight vector ``weights``.

    ``means`` and ``variances`` have shape (T, M). ``failed`` counts the
    hyperparameter samples dropped because their covariance could not be
    factorised.
    """

    means: np.ndarray
    variances: np.ndarray
    weights: np.ndarray
    failed: int = 0

    def __post_init__(self) -> None:
        means = np.atleast_2d(np.asarray(self.means, dtype=float))
        variances = np.atleast_2d(np.asarray(self.variances, dtype=float))
        weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if means.shape != variances.shape or means.shape[1] != weights.shape[0]:
            raise ValueError("means, variances and weights have inconsistent shapes")
        if np.any(variances <= 0):
            raise ValueError("component variances must be positive")
        if np.any(weights < 0) or abs(float(np.sum(weights)) - 1.0) > WEIGHT_TOLERANCE:
            raise ValueError("weights must be non-negative and sum to one")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "variances", variances)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_components(cls, components: Sequence[GaussianPredictive], failed: int = 0) -> "PredictiveMixture":
        if not components:
            raise ValueError("at least one component is required")
        means = np.stack([component.mean for component in components], axis=1)
        variances = np.stack([component.variance for component in components], axis=1)
        weights = np.full(len(components), 1.0 / len(components))
        return cls(means=means, variances=variances, weights=weights, failed=failed)

    @property
    def n_points(self) -> int:
        return int(self.means.shape[0])

    @property
    def n_components(self) -> int:
        return int(self.means.shape[1])

    def denormalized(self, norm: NormRecord | None) -> tuple[np.ndarray, np.ndarray]:
        if norm is None:
            return self.means, self.variances
        return norm.denormalize_mean(self.means), norm.denormalize_variance(self.variances)

    def mean(self, norm: NormRecord | None = None) -> np.ndarray:
        """Mixture mean per test point."""
        means, _ = self.denormalized(norm)
        return means @ self.weights

    def log_density(self, y: np.ndarray, norm: NormRecord | None = None) -> np.ndarray:
        """Pointwise log mixture density of ``y`` in original units."""
        y = np.asarray(y, dtype=float).ravel()
        if y.shape[0] != self.n_points:
            raise ValueError(f"expected {self.n_points} targets, got {y.shape[0]}")
        means, variances = self.denormalized(norm)
        log_components = -0.5 * (LOG_2PI + np.log(variances) + (y[:, None] - means) ** 2 / variances)
        with np.errstate(divide="ignore"):
            log_weights = np.log(self.weights)
        return logsumexp(log_components + log_weights, axis=1)


def mixture_predict(data: Dataset, thetas: Sequence[SmHyperParams], Xstar: np.ndarray) -> PredictiveMixture:
    """Mixture predictive over equally weighted hyperparameter samples.

    Failure Modes:
        - Empty ``thetas``: ``ValueError``.
        - Every sample fails to factorise: ``AllComponentsFailed``.
    """

    if not thetas:
        raise ValueError("thetas must not be empty")
    components: list[GaussianPredictive] = []
    failed = 0
    for theta in thetas:
        try:
            components.append(posterior_predictive(data, theta, Xstar))
        except FactorizationFailure:
            failed += 1
    if not components:
        raise AllComponentsFailed(f"all {len(thetas)} mixture components failed on {data.name}")
    if failed:
        log_event(
            "mixture_components_dropped",
            {"dataset": data.name, "failed": failed, "total": len(thetas)},
            level=logging.WARNING,
        )
    return PredictiveMixture.from_components(components, failed=failed)


def pointwise_nlpd(mix: PredictiveMixture, y_true: np.ndarray, norm: NormRecord | None = None) -> np.ndarray:
    return -mix.log_density(y_true, norm)


def nlpd(mix: PredictiveMixture, y_true: np.ndarray, norm: NormRecord | None = None) -> float:
    """Mean negative log predictive density of the targets, in original units."""
    return float(np.mean(pointwise_nlpd(mix, y_true, norm)))


def mixture_quantiles(
    mix: PredictiveMixture,
    levels: Sequence[float],
    n_draws: int,
    rng: np.random.Generator,
    norm: NormRecord | None = None,
) -> np.ndarray:
    """Empirical quantiles per test point from ``n_draws`` mixture samples.

    Returns an array of shape (len(levels), T) in original units.

    Failure Modes:
        - Levels outside (0, 1) or ``n_draws < 100``: ``ValueError``.
    """

    levels = np.asarray(levels, dtype=float)
    if np.any(levels <= 0) or np.any(levels >= 1):
        raise ValueError("quantile levels must lie in (0, 1)")
    if n_draws < 100:
        raise ValueError("n_draws must be at least 100")
    means, variances = mix.denormalized(norm)
    chosen = rng.choice(mix.n_components, size=(mix.n_points, n_draws), p=mix.weights)
    centres = np.take_along_axis(means, chosen, axis=1)
    scales = np.sqrt(np.take_along_axis(variances, chosen, axis=1))
    draws = centres + scales * rng.standard_normal((mix.n_points, n_draws))
    return np.quantile(draws, levels, axis=1)


def central_interval(
    mix: PredictiveMixture,
    level: float,
    n_draws: int,
    rng: np.random.Generator,
    norm: NormRecord | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    tail = 0.5 * (1.0 - level)
    lower, upper = mixture_quantiles(mix, [tail, 1.0 - tail], n_draws, rng, norm)
    return lower, upper


def coverage(bounds: tuple[np.ndarray, np.ndarray] | np.ndarray, y_true: np.ndarray) -> float:
    """Fraction of targets inside ``[lower, upper]``."""
    lower, upper = (np.asarray(bound, dtype=float).ravel() for bound in bounds)
    y_true = np.asarray(y_true, dtype=float).ravel()
    if not lower.shape == upper.shape == y_true.shape:
        raise ValueError("bounds and targets must have the same length")
    return float(np.mean((y_true >= lower) & (y_true <= upper)))


__all__ = [
    "PredictiveMixture",
    "central_interval",
    "coverage",
    "mixture_predict",
    "mixture_quantiles",
    "nlpd",
    "pointwise_nlpd",
]
