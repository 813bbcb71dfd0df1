"""Spectral mixture kernel evaluation."""
from .spectral_mixture import (
    SmHyperParams,
    SpectralComponent,
    cross_covariance,
    gram_matrix,
    sm_kernel,
    spectral_density,
    vector_length,
)

__all__ = [
    "SmHyperParams",
    "SpectralComponent",
    "cross_covariance",
    "gram_matrix",
    "sm_kernel",
    "spectral_density",
    "vector_length",
]
