"""Posterior samplers over spectral mixture hyperparameters."""
from .hmc import HmcTrace, hmc_run, leapfrog, sample_hmc, write_hmc_trace
from .nested import (
    WeightedPosterior,
    merge_runs,
    nested_sample,
    resample_equal,
    run_nested,
    run_nested_multi,
    write_nested_trace,
)

__all__ = [
    "HmcTrace",
    "WeightedPosterior",
    "hmc_run",
    "leapfrog",
    "merge_runs",
    "nested_sample",
    "resample_equal",
    "run_nested",
    "run_nested_multi",
    "sample_hmc",
    "write_hmc_trace",
    "write_nested_trace",
]
