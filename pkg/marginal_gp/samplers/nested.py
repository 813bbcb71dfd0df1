"""Nested sampling over the unit hypercube with random-direction slice proposals.

The sampler keeps ``n_live`` points, repeatedly removes the lowest-likelihood
point, assigns it the prior-mass shell ``X_(i-1) - X_i`` of the
deterministic schedule ``X_i = exp(-i / n_live)`` and replaces it with a point
drawn from the prior above the removed likelihood. Evidence and weights are
accumulated in log space. When the live points can hold no more than
``stop_frac`` of the evidence, the remaining live points share the final
prior mass ``X_K`` equally.
"""
from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np
from scipy.special import logsumexp

from ..errors import FactorizationFailure, PriorExhausted
from ..kernels.spectral_mixture import SmHyperParams
from ..logging_utils import log_event, log_metric
from ..priors.hyperpriors import PriorSpec, unit_cube_transform

Evaluator = Callable[[np.ndarray], tuple[Any, float]]
SeedLike = int | np.random.SeedSequence

COLLAPSED_BRACKET = 1e-12
INITIAL_DRAW_ATTEMPTS = 100


@dataclass(frozen=True, eq=False)
class LivePoint:
    cube: np.ndarray
    params: Any
    log_like: float


@dataclass(frozen=True, eq=False)
class DeadPoint:
    """A removed (or final live) point with its normalised log importance weight."""

    cube: np.ndarray
    params: Any
    log_like: float
    log_weight: float
    log_volume: float


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    log_volume: float
    log_like: float
    log_evidence: float


@dataclass(frozen=True, eq=False)
class WeightedPosterior:
    """Importance-weighted samples and the evidence estimate of one or more runs."""

    dead_points: tuple[DeadPoint, ...]
    log_evidence: float
    n_live: int
    n_iterations: int
    information: float
    n_calls: int
    trace: tuple[TraceRow, ...] = ()
    plateau: bool = False

    @property
    def log_weights(self) -> np.ndarray:
        return np.array([point.log_weight for point in self.dead_points])

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    @property
    def log_likes(self) -> np.ndarray:
        return np.array([point.log_like for point in self.dead_points])

    @property
    def log_evidence_error(self) -> float:
        """Standard error estimate ``sqrt(H / n_live)``."""
        return math.sqrt(max(self.information, 0.0) / self.n_live)

    @property
    def samples(self) -> list[Any]:
        return [point.params for point in self.dead_points]


def reflect_into_unit_cube(u: np.ndarray) -> np.ndarray:
    """Fold coordinates back into [0, 1] by mirror reflection at the faces."""
    folded = np.mod(u, 2.0)
    return np.where(folded > 1.0, 2.0 - folded, folded)


def _make_evaluator(
    log_likelihood: Callable[[Any], float], prior_transform: Callable[[np.ndarray], Any]
) -> tuple[Evaluator, list[int]]:
    calls = [0]

    def evaluate(cube: np.ndarray) -> tuple[Any, float]:
        params = prior_transform(cube)
        calls[0] += 1
        try:
            value = float(log_likelihood(params))
        except FactorizationFailure:
            return params, -math.inf
        if math.isnan(value):
            return params, -math.inf
        return params, value

    return evaluate, calls


def constrained_slice_step(
    start: LivePoint,
    evaluate: Evaluator,
    threshold: float,
    n_slices: int,
    rng: np.random.Generator,
    max_shrinks: int = 1_000_000,
) -> LivePoint:
    """Move ``start`` by ``n_slices`` random-direction slices inside ``log_like > threshold``.

    Each slice picks a uniform direction, places an interval of unit width
    around the current point at a random offset, and shrinks it towards the
    current point on every rejection. Coordinates leaving the cube are
    reflected back into it.

    Failure Modes:
        - ``PriorExhausted`` after ``max_shrinks`` rejections in total or when
          a bracket collapses onto the current point, which only happens on a
          likelihood plateau at the threshold.
    """

    if not start.log_like > threshold:
        raise ValueError("the starting point must lie strictly above the threshold")
    if n_slices < 1:
        raise ValueError("n_slices must be at least 1")
    current = start
    ndim = current.cube.shape[0]
    shrinks = 0
    for _ in range(n_slices):
        direction = rng.standard_normal(ndim)
        direction /= np.linalg.norm(direction)
        offset = rng.random()
        lower, upper = -offset, 1.0 - offset
        while True:
            step = lower + rng.random() * (upper - lower)
            candidate = reflect_into_unit_cube(current.cube + step * direction)
            params, log_like = evaluate(candidate)
            if log_like > threshold:
                current = LivePoint(cube=candidate, params=params, log_like=log_like)
                break
            shrinks += 1
            if step < 0:
                lower = step
            else:
                upper = step
            if shrinks >= max_shrinks or upper - lower < COLLAPSED_BRACKET:
                raise PriorExhausted(
                    f"no point above log-likelihood {threshold:.6g} after {shrinks} shrinks"
                )
    return current


def _draw_initial(evaluate: Evaluator, ndim: int, rng: np.random.Generator) -> LivePoint:
    for _ in range(INITIAL_DRAW_ATTEMPTS):
        cube = rng.random(ndim)
        params, log_like = evaluate(cube)
        if math.isfinite(log_like):
            break
    return LivePoint(cube=cube, params=params, log_like=log_like)


def nested_sample(
    log_likelihood: Callable[[Any], float],
    prior_transform: Callable[[np.ndarray], Any],
    ndim: int,
    n_live: int = 100,
    stop_frac: float = 0.01,
    rng_seed: SeedLike = 0,
    n_slices: int = 5,
    max_iterations: int = 100_000,
    max_shrinks: int = 1_000_000,
) -> WeightedPosterior:
    """Run nested sampling for any likelihood and prior transform on the unit cube.

    Failure Modes:
        - ``n_live < 2`` or ``stop_frac`` outside (0, 1): ``ValueError``.
        - A likelihood plateau ends the run early; the result is finalised
          with the remaining live points and flagged ``plateau=True``.
    """

    if n_live < 2:
        raise ValueError("n_live must be at least 2")
    if not 0 < stop_frac < 1:
        raise ValueError("stop_frac must be between 0 and 1")
    rng = np.random.default_rng(rng_seed)
    evaluate, calls = _make_evaluator(log_likelihood, prior_transform)
    live = [_draw_initial(evaluate, ndim, rng) for _ in range(n_live)]
    log_likes = np.array([point.log_like for point in live])

    log_shell = math.log1p(-math.exp(-1.0 / n_live))
    log_stop = math.log(stop_frac)
    log_z = -math.inf
    log_volume = 0.0
    dead: list[tuple[LivePoint, float, float]] = []
    trace: list[TraceRow] = []
    plateau = False
    iteration = 0

    while iteration < max_iterations:
        iteration += 1
        worst = int(np.argmin(log_likes))
        threshold = float(log_likes[worst])
        log_width = log_shell - (iteration - 1) / n_live
        log_volume = -iteration / n_live
        log_z = float(np.logaddexp(log_z, threshold + log_width))
        dead.append((live[worst], threshold + log_width, log_volume))
        trace.append(TraceRow(iteration, log_volume, threshold, log_z))

        candidates = [j for j in range(len(live)) if j != worst and log_likes[j] > threshold]
        try:
            if not candidates:
                raise PriorExhausted("no live point lies above the threshold")
            start = live[candidates[int(rng.integers(len(candidates)))]]
            replacement = constrained_slice_step(start, evaluate, threshold, n_slices, rng, max_shrinks)
        except PriorExhausted as exc:
            log_event("nested_plateau", {"iteration": iteration, "log_like": threshold, "reason": str(exc)})
            del live[worst]
            log_likes = np.delete(log_likes, worst)
            plateau = True
            break
        live[worst] = replacement
        log_likes[worst] = replacement.log_like

        if math.isfinite(log_z) and float(np.max(log_likes)) + log_volume - log_z < log_stop:
            break
    else:
        log_event(
            "nested_max_iterations",
            {"iterations": iteration, "log_evidence": log_z},
            level=logging.WARNING,
        )

    log_final_share = log_volume - math.log(len(live))
    for point in sorted(live, key=lambda p: p.log_like):
        raw = point.log_like + log_final_share
        log_z = float(np.logaddexp(log_z, raw))
        dead.append((point, raw, log_volume))

    raw_weights = np.array([raw for _, raw, _ in dead])
    log_weights = raw_weights - logsumexp(raw_weights)
    points = tuple(
        DeadPoint(
            cube=point.cube,
            params=point.params,
            log_like=point.log_like,
            log_weight=float(log_weight),
            log_volume=volume,
        )
        for (point, _, volume), log_weight in zip(dead, log_weights)
    )
    posterior = WeightedPosterior(
        dead_points=points,
        log_evidence=log_z,
        n_live=n_live,
        n_iterations=iteration,
        information=_information(points, log_z),
        n_calls=calls[0],
        trace=tuple(trace),
        plateau=plateau,
    )
    log_metric(
        "nested_log_evidence",
        log_z,
        {"iterations": iteration, "calls": calls[0], "n_live": n_live, "plateau": plateau},
    )
    return posterior


def _information(points: Sequence[DeadPoint], log_evidence: float) -> float:
    """Kullback-Leibler information H (nats) of the posterior relative to the prior."""
    log_weights = np.array([point.log_weight for point in points])
    log_likes = np.array([point.log_like for point in points])
    mask = np.isfinite(log_weights) & np.isfinite(log_likes)
    if not math.isfinite(log_evidence) or not np.any(mask):
        return 0.0
    return float(np.sum(np.exp(log_weights[mask]) * (log_likes[mask] - log_evidence)))


def run_nested(
    loglike: Callable[[SmHyperParams], float],
    spec: PriorSpec,
    n_live: int = 100,
    stop_frac: float = 0.01,
    rng_seed: SeedLike = 0,
    n_slices: int = 5,
    max_iterations: int = 100_000,
    max_shrinks: int = 1_000_000,
) -> WeightedPosterior:
    """Nested sampling of spectral mixture hyperparameters under the prior ``spec``."""

    log_event(
        "nested_start",
        {"n_live": n_live, "q": spec.q_components, "dims": spec.dims, "family": spec.frequency_family},
    )
    return nested_sample(
        loglike,
        lambda cube: unit_cube_transform(cube, spec),
        spec.n_params,
        n_live=n_live,
        stop_frac=stop_frac,
        rng_seed=rng_seed,
        n_slices=n_slices,
        max_iterations=max_iterations,
        max_shrinks=max_shrinks,
    )


def merge_runs(posteriors: Sequence[WeightedPosterior]) -> WeightedPosterior:
    """Pool independent runs of the same problem.

    The pooled evidence is the mean of the run evidences and each point weighs
    its likelihood times shell volume over the summed run evidences.
    """

    if not posteriors:
        raise ValueError("at least one posterior is required")
    if len(posteriors) == 1:
        return posteriors[0]
    log_evidences = np.array([post.log_evidence for post in posteriors])
    log_total = float(logsumexp(log_evidences))
    pooled: list[DeadPoint] = []
    for post in posteriors:
        for point in post.dead_points:
            pooled.append(
                DeadPoint(
                    cube=point.cube,
                    params=point.params,
                    log_like=point.log_like,
                    log_weight=point.log_weight + post.log_evidence - log_total,
                    log_volume=point.log_volume,
                )
            )
    pooled.sort(key=lambda point: point.log_like)
    log_evidence = log_total - math.log(len(posteriors))
    points = tuple(pooled)
    return WeightedPosterior(
        dead_points=points,
        log_evidence=log_evidence,
        n_live=sum(post.n_live for post in posteriors),
        n_iterations=sum(post.n_iterations for post in posteriors),
        information=_information(points, log_evidence),
        n_calls=sum(post.n_calls for post in posteriors),
        trace=tuple(row for post in posteriors for row in post.trace),
        plateau=any(post.plateau for post in posteriors),
    )


def run_nested_multi(
    loglike: Callable[[SmHyperParams], float],
    spec: PriorSpec,
    runs: int,
    rng_seed: int = 0,
    workers: int = 1,
    **kwargs: Any,
) -> WeightedPosterior:
    """Independent seeded runs executed concurrently and pooled with :func:`merge_runs`."""

    if runs < 1:
        raise ValueError("runs must be at least 1")
    if runs == 1:
        return run_nested(loglike, spec, rng_seed=rng_seed, **kwargs)
    seeds = np.random.SeedSequence(rng_seed).spawn(runs)
    with ThreadPoolExecutor(max_workers=max(1, min(workers, runs))) as pool:
        posteriors = list(pool.map(lambda seed: run_nested(loglike, spec, rng_seed=seed, **kwargs), seeds))
    return merge_runs(posteriors)


def resample_equal(post: WeightedPosterior, m: int, rng: np.random.Generator) -> list[Any]:
    """Systematic resampling of ``m`` equally weighted draws from the weighted points."""

    if m < 1:
        raise ValueError("m must be at least 1")
    cumulative = np.cumsum(post.weights)
    cumulative[-1] = 1.0
    positions = (rng.random() + np.arange(m)) / m
    index = np.minimum(np.searchsorted(cumulative, positions, side="right"), len(cumulative) - 1)
    return [post.dead_points[i].params for i in index]


def write_nested_trace(post: WeightedPosterior, path: Path | str) -> Path:
    """Write the per-iteration convergence trace for external plotting."""

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["iteration", "log_volume", "log_like", "log_evidence"])
        for row in post.trace:
            writer.writerow([row.iteration, repr(row.log_volume), repr(row.log_like), repr(row.log_evidence)])
    return path


__all__ = [
    "DeadPoint",
    "LivePoint",
    "TraceRow",
    "WeightedPosterior",
    "constrained_slice_step",
    "merge_runs",
    "nested_sample",
    "reflect_into_unit_cube",
    "resample_equal",
    "run_nested",
    "run_nested_multi",
    "write_nested_trace",
]
