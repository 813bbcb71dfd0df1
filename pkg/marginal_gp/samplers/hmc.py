"""Hamiltonian Monte Carlo over log hyperparameters with dual-averaging step sizes.

Momenta are standard normal, trajectories use the leapfrog integrator with a
path length jittered uniformly around ``cfg.path_length``, and the step size
is adapted towards ``cfg.target_accept`` during warm-up only.
"""
from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from ..config import HmcConfig
from ..errors import DivergentTrajectory, FactorizationFailure
from ..gp.dataset import Dataset
from ..gp.regression import lml_and_gradient
from ..kernels.spectral_mixture import SmHyperParams
from ..logging_utils import log_event, log_metric
from ..priors.hyperpriors import (
    PriorSpec,
    from_unconstrained,
    to_unconstrained,
    unconstrained_log_prior,
)
from ..training.ml2 import initialize

LogDensity = Callable[[np.ndarray], tuple[float, np.ndarray]]
Gradient = Callable[[np.ndarray], np.ndarray]

DIVERGENCE_THRESHOLD = 1000.0
START_ATTEMPTS = 100


def leapfrog(
    z: np.ndarray, p: np.ndarray, eps: float, n_steps: int, grad: Gradient
) -> tuple[np.ndarray, np.ndarray]:
    """Integrate Hamiltonian dynamics for ``n_steps`` half-kick, drift, half-kick steps.

    ``grad`` is the gradient of the log target density.

    Failure Modes:
        - ``eps <= 0`` or ``n_steps < 1``: ``ValueError``.
        - Non-finite position or momentum along the way: ``DivergentTrajectory``.
    """

    if not eps > 0:
        raise ValueError("eps must be positive")
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    z = np.array(z, dtype=float, copy=True)
    p = np.array(p, dtype=float, copy=True)
    p += 0.5 * eps * grad(z)
    for step in range(n_steps):
        z += eps * p
        if step < n_steps - 1:
            p += eps * grad(z)
        if not (np.all(np.isfinite(z)) and np.all(np.isfinite(p))):
            raise DivergentTrajectory(f"trajectory became non-finite at step {step + 1}")
    p += 0.5 * eps * grad(z)
    if not np.all(np.isfinite(p)):
        raise DivergentTrajectory("trajectory became non-finite at the final half step")
    return z, p


class DualAveraging:
    """Step-size adaptation that drives the mean acceptance probability to a target."""

    def __init__(
        self,
        initial_step_size: float,
        target_accept: float = 0.8,
        gamma: float = 0.05,
        t0: float = 10.0,
        kappa: float = 0.75,
    ) -> None:
        self.target_accept = target_accept
        self.gamma = gamma
        self.t0 = t0
        self.kappa = kappa
        self.mu = math.log(10.0 * initial_step_size)
        self.log_step = math.log(initial_step_size)
        self.log_step_bar = 0.0
        self.h_bar = 0.0
        self.iteration = 0

    @property
    def step_size(self) -> float:
        return math.exp(self.log_step)

    @property
    def final_step_size(self) -> float:
        return math.exp(self.log_step_bar)

    def update(self, accept_prob: float) -> float:
        self.iteration += 1
        m = self.iteration
        eta = 1.0 / (m + self.t0)
        self.h_bar = (1.0 - eta) * self.h_bar + eta * (self.target_accept - accept_prob)
        self.log_step = self.mu - math.sqrt(m) / self.gamma * self.h_bar
        weight = m ** (-self.kappa)
        self.log_step_bar = weight * self.log_step + (1.0 - weight) * self.log_step_bar
        return self.step_size


class _CachedTarget:
    # leapfrog only needs gradients; the last evaluation is reused for the energy
    def __init__(self, log_density: LogDensity) -> None:
        self._log_density = log_density
        self._z: np.ndarray | None = None
        self._value = -math.inf
        self._grad: np.ndarray | None = None

    def evaluate(self, z: np.ndarray) -> tuple[float, np.ndarray]:
        if self._z is None or not np.array_equal(z, self._z):
            value, grad = self._log_density(z)
            self._z = np.array(z, copy=True)
            self._value = float(value)
            self._grad = np.asarray(grad, dtype=float)
        return self._value, self._grad

    def grad(self, z: np.ndarray) -> np.ndarray:
        return self.evaluate(z)[1]


@dataclass(frozen=True)
class ChainStep:
    iteration: int
    log_density: float
    step_size: float
    accept_prob: float
    accepted: bool
    warmup: bool


@dataclass(frozen=True, eq=False)
class ChainResult:
    """Post-warm-up draws of one chain in unconstrained coordinates."""

    draws: np.ndarray
    log_densities: np.ndarray
    accept_rate: float
    divergence_count: int
    step_size: float
    steps: tuple[ChainStep, ...] = ()


def _path_bounds(cfg: HmcConfig) -> tuple[int, int]:
    low = max(1, int(round(cfg.path_length * (1.0 - cfg.path_jitter))))
    high = max(low, int(round(cfg.path_length * (1.0 + cfg.path_jitter))))
    return low, high


def sample_hmc(
    log_density: LogDensity, z0: np.ndarray, cfg: HmcConfig, rng: np.random.Generator
) -> ChainResult:
    """Run one chain on any differentiable log density ``z -> (value, gradient)``.

    Proposals with an energy error above 1000 or a non-finite trajectory
    are divergent: they are rejected and counted. A proposal ending where
    the log density is ``-inf`` (outside the prior support) is a plain
    rejection and is not counted as a divergence.

    Failure Modes:
        - Non-finite log density at ``z0``: ``ValueError``.
    """

    target = _CachedTarget(log_density)
    z = np.array(z0, dtype=float, copy=True)
    log_p, _ = target.evaluate(z)
    if not math.isfinite(log_p):
        raise ValueError("the chain must start where the log density is finite")
    adaptation = DualAveraging(cfg.initial_step_size, cfg.target_accept)
    step_size = adaptation.step_size
    low, high = _path_bounds(cfg)
    draws = np.empty((cfg.n_samples, z.shape[0]))
    log_densities = np.empty(cfg.n_samples)
    steps: list[ChainStep] = []
    accepted_count = 0
    divergences = 0

    for iteration in range(cfg.n_warmup + cfg.n_samples):
        warmup = iteration < cfg.n_warmup
        momentum = rng.standard_normal(z.shape[0])
        n_steps = int(rng.integers(low, high + 1))
        initial_energy = -log_p + 0.5 * float(momentum @ momentum)
        divergent = outside = False
        try:
            z_new, p_new = leapfrog(z, momentum, step_size, n_steps, target.grad)
            log_p_new, _ = target.evaluate(z_new)
            if log_p_new == -math.inf:
                outside = True
            else:
                energy_error = -log_p_new + 0.5 * float(p_new @ p_new) - initial_energy
                divergent = not math.isfinite(energy_error) or abs(energy_error) > DIVERGENCE_THRESHOLD
        except DivergentTrajectory:
            divergent = True
        if outside:
            accept_prob = 0.0
        elif divergent:
            divergences += 1
            accept_prob = 0.0
            log_event(
                "hmc_divergence",
                {"iteration": iteration, "step_size": step_size, "warmup": warmup},
                level=logging.DEBUG,
            )
        else:
            accept_prob = math.exp(min(0.0, -energy_error))
        accepted = not (divergent or outside) and rng.random() < accept_prob
        if accepted:
            z, log_p = z_new, log_p_new

        if warmup:
            step_size = adaptation.update(accept_prob)
            if iteration == cfg.n_warmup - 1:
                step_size = adaptation.final_step_size
                log_event("hmc_warmup_done", {"step_size": step_size, "divergences": divergences})
        else:
            index = iteration - cfg.n_warmup
            draws[index] = z
            log_densities[index] = log_p
            accepted_count += int(accepted)
        steps.append(ChainStep(iteration, log_p, step_size, accept_prob, accepted, warmup))

    return ChainResult(
        draws=draws,
        log_densities=log_densities,
        accept_rate=accepted_count / cfg.n_samples,
        divergence_count=divergences,
        step_size=step_size,
        steps=tuple(steps),
    )


@dataclass(frozen=True, eq=False)
class HmcTrace:
    """Post-warm-up hyperparameter draws of every chain, concatenated in chain order."""

    samples: tuple[SmHyperParams, ...]
    accept_rate: float
    divergence_count: int
    step_sizes: tuple[float, ...] = ()
    chains: tuple[ChainResult, ...] = ()

    def __post_init__(self) -> None:
        if not 0.0 <= self.accept_rate <= 1.0:
            raise ValueError("accept_rate must lie in [0, 1]")


def gp_log_posterior(data: Dataset, spec: PriorSpec) -> LogDensity:
    """Unnormalised log posterior of log hyperparameters and its gradient."""

    q, dims = spec.q_components, spec.dims
    if dims != data.dims:
        raise ValueError(f"prior has {dims} input dimensions, data has {data.dims}")

    def log_density(z: np.ndarray) -> tuple[float, np.ndarray]:
        log_prior, prior_grad = unconstrained_log_prior(z, spec)
        if not math.isfinite(log_prior):
            return -math.inf, np.zeros_like(z)
        try:
            lml, lml_grad = lml_and_gradient(data, from_unconstrained(z, q, dims))
        except (FactorizationFailure, ValueError):
            return -math.inf, np.zeros_like(z)
        if not (math.isfinite(lml) and np.all(np.isfinite(lml_grad))):
            return -math.inf, np.zeros_like(z)
        return log_prior + lml, prior_grad + lml_grad

    return log_density


def _starting_point(data: Dataset, spec: PriorSpec, log_density: LogDensity, rng: np.random.Generator) -> np.ndarray:
    for _ in range(START_ATTEMPTS):
        params = initialize(data, spec.q_components, rng, f_nyq=spec.f_nyq)
        if spec.identifiability:
            params = params.sorted_by_frequency()
        z0 = to_unconstrained(params)
        if math.isfinite(log_density(z0)[0]):
            return z0
    raise FactorizationFailure(f"no finite starting point in {START_ATTEMPTS} initialisations")


def hmc_run(data: Dataset, spec: PriorSpec, q: int, cfg: HmcConfig, workers: int = 1) -> HmcTrace:
    """Sample hyperparameters of a ``q``-component kernel with ``cfg.chains`` seeded chains.

    Chain ``k`` uses seed ``cfg.rng_seed + k`` and starts from the data-driven
    initialisation protocol; chains run concurrently on up to ``workers`` threads.
    """

    if q != spec.q_components:
        raise ValueError(f"q={q} does not match the prior's {spec.q_components} components")
    log_density = gp_log_posterior(data, spec)

    def run_chain(chain: int) -> ChainResult:
        rng = np.random.default_rng(cfg.rng_seed + chain)
        z0 = _starting_point(data, spec, log_density, rng)
        return sample_hmc(log_density, z0, cfg, rng)

    log_event("hmc_start", {"q": q, "chains": cfg.chains, "n_warmup": cfg.n_warmup, "n_samples": cfg.n_samples})
    with ThreadPoolExecutor(max_workers=max(1, min(workers, cfg.chains))) as pool:
        chains = tuple(pool.map(run_chain, range(cfg.chains)))

    samples = tuple(
        from_unconstrained(draw, q, spec.dims) for chain in chains for draw in chain.draws
    )
    accept_rate = float(np.mean([chain.accept_rate for chain in chains]))
    trace = HmcTrace(
        samples=samples,
        accept_rate=accept_rate,
        divergence_count=sum(chain.divergence_count for chain in chains),
        step_sizes=tuple(chain.step_size for chain in chains),
        chains=chains,
    )
    log_metric("hmc_accept_rate", accept_rate, {"divergences": trace.divergence_count, "chains": cfg.chains})
    return trace


def write_hmc_trace(trace: HmcTrace, path: Path | str) -> Path:
    """Per-iteration chain trace: log posterior, step size and acceptance."""

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["chain", "iteration", "warmup", "log_posterior", "step_size", "accept_prob", "accepted"])
        for index, chain in enumerate(trace.chains):
            for step in chain.steps:
                writer.writerow(
                    [
                        index,
                        step.iteration,
                        int(step.warmup),
                        repr(step.log_density),
                        repr(step.step_size),
                        repr(step.accept_prob),
                        int(step.accepted),
                    ]
                )
    return path


__all__ = [
    "ChainResult",
    "ChainStep",
    "DualAveraging",
    "HmcTrace",
    "gp_log_posterior",
    "hmc_run",
    "leapfrog",
    "sample_hmc",
    "write_hmc_trace",
]
