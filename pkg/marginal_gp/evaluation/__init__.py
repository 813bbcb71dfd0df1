"""Mixture predictive distribution and scoring."""
from .predictive import PredictiveMixture, coverage, mixture_predict, mixture_quantiles, nlpd

__all__ = ["PredictiveMixture", "coverage", "mixture_predict", "mixture_quantiles", "nlpd"]
