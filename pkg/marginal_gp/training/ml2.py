"""Type-II maximum likelihood: data-driven initialisation and Adam ascent with restarts."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from ..config import Ml2Config
from ..errors import AllRestartsFailed, DegenerateData, FactorizationFailure
from ..gp.dataset import Dataset, nyquist_frequency
from ..gp.regression import lml_and_gradient
from ..kernels.spectral_mixture import SmHyperParams
from ..logging_utils import log_event, log_metric
from ..priors.hyperpriors import from_unconstrained, to_unconstrained

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8


def initialize(
    data: Dataset,
    q: int,
    rng: np.random.Generator,
    f_nyq: np.ndarray | float | None = None,
) -> SmHyperParams:
    """Draw a starting point tied to the training data.

    Weights are ``std(y) / q``; bandwidths are half-normal with scale equal to
    the largest pairwise input distance; frequencies are uniform on
    ``(0, f_nyq]`` per dimension and the noise variance is ``0.1 var(y)``.
    ``f_nyq`` defaults to the dataset's Nyquist frequency.

    Failure Modes:
        - Fewer than two points, coincident inputs or constant targets:
          ``DegenerateData``.
    """

    if q < 1:
        raise ValueError("q must be at least 1")
    if data.n < 2:
        raise DegenerateData("at least two training points are needed")
    max_distance = float(np.max(pdist(data.inputs)))
    if not max_distance > 0:
        raise DegenerateData("all training inputs coincide")
    target_std = float(np.std(data.targets))
    if not target_std > 0:
        raise DegenerateData("training targets are constant")
    if f_nyq is None:
        f_nyq = data.nyquist_freq if data.nyquist_freq is not None else nyquist_frequency(data.inputs)
    f_nyq = np.broadcast_to(np.asarray(f_nyq, dtype=float), (data.dims,))

    tiny = np.finfo(float).tiny
    weights = np.full(q, target_std / q)
    bandwidths = np.maximum(np.abs(rng.normal(0.0, max_distance, size=(q, data.dims))), tiny)
    mean_freqs = f_nyq * (1.0 - rng.random((q, data.dims)))
    return SmHyperParams.from_arrays(weights, mean_freqs, bandwidths, 0.1 * target_std**2)


@dataclass(frozen=True, eq=False)
class RestartOutcome:
    params: SmHyperParams
    lml: float
    initial_lml: float
    iterations: int


def _ascend(data: Dataset, params: SmHyperParams, cfg: Ml2Config, restart: int) -> RestartOutcome | None:
    try:
        value, grad = lml_and_gradient(data, params)
    except FactorizationFailure as exc:
        log_event("ml2_restart_abandoned", {"restart": restart, "reason": str(exc)}, level=logging.WARNING)
        return None
    if not math.isfinite(value):
        log_event("ml2_restart_abandoned", {"restart": restart, "reason": "non-finite likelihood"}, level=logging.WARNING)
        return None

    q, dims = params.q, params.dims
    z = to_unconstrained(params)
    first_moment = np.zeros_like(z)
    second_moment = np.zeros_like(z)
    initial_lml = best_lml = value
    best_params = params
    iteration = 0
    for iteration in range(1, cfg.max_iters + 1):
        if float(np.linalg.norm(grad)) < cfg.gradient_tolerance:
            break
        first_moment = ADAM_BETA1 * first_moment + (1.0 - ADAM_BETA1) * grad
        second_moment = ADAM_BETA2 * second_moment + (1.0 - ADAM_BETA2) * grad**2
        m_hat = first_moment / (1.0 - ADAM_BETA1**iteration)
        v_hat = second_moment / (1.0 - ADAM_BETA2**iteration)
        z = z + cfg.learning_rate * m_hat / (np.sqrt(v_hat) + ADAM_EPSILON)
        try:
            candidate = from_unconstrained(z, q, dims)
            value, grad = lml_and_gradient(data, candidate)
        except (FactorizationFailure, ValueError) as exc:
            log_event("ml2_restart_stopped", {"restart": restart, "iteration": iteration, "reason": str(exc)})
            break
        if not (math.isfinite(value) and np.all(np.isfinite(grad))):
            break
        if value > best_lml:
            best_lml, best_params = value, candidate
    return RestartOutcome(params=best_params, lml=best_lml, initial_lml=initial_lml, iterations=iteration)


def ml2_train(
    data: Dataset,
    q: int,
    cfg: Ml2Config,
    workers: int = 1,
    f_nyq: np.ndarray | float | None = None,
) -> tuple[SmHyperParams, float]:
    """Maximise the log marginal likelihood over ``cfg.n_restarts`` seeded restarts.

    Each restart tracks its best iterate; the restart with the highest
    log marginal likelihood wins.

    Failure Modes:
        - Every restart abandoned at its starting point: ``AllRestartsFailed``.
    """

    seeds = np.random.SeedSequence(cfg.rng_seed).spawn(cfg.n_restarts)

    def run(restart: int) -> RestartOutcome | None:
        rng = np.random.default_rng(seeds[restart])
        outcome = _ascend(data, initialize(data, q, rng, f_nyq=f_nyq), cfg, restart)
        if outcome is not None:
            log_event(
                "ml2_restart_done",
                {"restart": restart, "lml": outcome.lml, "iterations": outcome.iterations},
            )
        return outcome

    with ThreadPoolExecutor(max_workers=max(1, min(workers, cfg.n_restarts))) as pool:
        outcomes = list(pool.map(run, range(cfg.n_restarts)))
    finished = [outcome for outcome in outcomes if outcome is not None]
    if not finished:
        raise AllRestartsFailed(f"all {cfg.n_restarts} restarts failed on {data.name}")
    best = max(finished, key=lambda outcome: outcome.lml)
    log_metric("ml2_final_lml", best.lml, {"dataset": data.name, "q": q, "restarts": len(finished)})
    return best.params, best.lml


__all__ = ["RestartOutcome", "initialize", "ml2_train"]
