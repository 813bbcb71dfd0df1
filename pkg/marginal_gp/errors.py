"""Exception hierarchy shared by every module of the toolkit."""
from __future__ import annotations


class MarginalGPError(Exception):
    """Base class for all toolkit errors."""


class FactorizationFailure(MarginalGPError):
    """The jittered covariance matrix could not be Cholesky factorised.

    Signals pathological hyperparameters. Likelihood-based callers treat it
    as a log-likelihood of ``-inf``.
    """


class PriorExhausted(MarginalGPError):
    """No point above the likelihood threshold could be found.

    Raised by the constrained slice sampler when the likelihood has a plateau
    at the current threshold.
    """


class DivergentTrajectory(MarginalGPError):
    """A leapfrog trajectory left the region where the target is finite."""


class AllRestartsFailed(MarginalGPError):
    """Every ML-II restart aborted before producing a valid iterate."""


class AllComponentsFailed(MarginalGPError):
    """Every hyperparameter sample of a predictive mixture failed to factorise."""


class DegenerateData(MarginalGPError, ValueError):
    """Inputs or targets carry no spread (constant columns, coincident inputs)."""


class ParseError(MarginalGPError, ValueError):
    """A data file could not be parsed."""

    def __init__(self, path: str, line: int, message: str) -> None:
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line


class DuplicateInput(MarginalGPError, ValueError):
    """Two rows of a series share the same input location."""


__all__ = [
    "AllComponentsFailed",
    "AllRestartsFailed",
    "DegenerateData",
    "DivergentTrajectory",
    "DuplicateInput",
    "FactorizationFailure",
    "MarginalGPError",
    "ParseError",
    "PriorExhausted",
]
