"""Hyperpriors and the unit-hypercube prior transform."""
from .hyperpriors import (
    PriorSpec,
    freq_prior_inverse_cdf,
    from_unconstrained,
    log_prior_density,
    params_to_unit_cube,
    to_unconstrained,
    unconstrained_log_prior,
    unit_cube_transform,
)

__all__ = [
    "PriorSpec",
    "freq_prior_inverse_cdf",
    "from_unconstrained",
    "log_prior_density",
    "params_to_unit_cube",
    "to_unconstrained",
    "unconstrained_log_prior",
    "unit_cube_transform",
]
