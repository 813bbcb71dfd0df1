"""Exact GP regression: data container, marginal likelihood and predictive."""
from .dataset import Dataset, NormRecord, nyquist_frequency
from .regression import (
    GaussianPredictive,
    lml_and_gradient,
    lml_gradient,
    log_marginal_likelihood,
    posterior_predictive,
)

__all__ = [
    "Dataset",
    "GaussianPredictive",
    "NormRecord",
    "lml_and_gradient",
    "lml_gradient",
    "log_marginal_likelihood",
    "nyquist_frequency",
    "posterior_predictive",
]
