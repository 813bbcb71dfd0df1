"""Hyperpriors for spectral mixture kernels and the unit-hypercube prior transform.

Weights, bandwidths and the noise variance carry log-normal priors. Each
frequency dimension carries either the piecewise prior (a log-normal lower
branch below the fundamental frequency and a uniform branch up to the
Nyquist frequency, half of the prior mass each), a plain log-normal prior in
units of the fundamental frequency, or a uniform prior on ``(0, f_nyq]``.

With forced identifiability the first-dimension frequencies are generated
in ascending order through the order statistics of uniforms, which keeps
the cube-to-parameter map a bijection.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np
from scipy.special import gammaln, ndtr, ndtri
from scipy.stats import lognorm

from ..kernels.spectral_mixture import SmHyperParams, vector_length

if TYPE_CHECKING:  # pragma: no cover
    from ..config import PriorConfig

FREQUENCY_FAMILIES = ("piecewise", "lognormal", "uniform")
_U_MIN = 1e-300
_U_MAX = 1.0 - 1e-16


def _check_unit_interval(u: np.ndarray) -> None:
    if np.any(np.isnan(u)) or np.any(u < 0.0) or np.any(u > 1.0):
        raise ValueError("unit-cube coordinates must lie in [0, 1]")


def _open(u: np.ndarray) -> np.ndarray:
    return np.clip(u, _U_MIN, _U_MAX)


@dataclass(frozen=True, eq=False)
class PriorSpec:
    """Per-hyperparameter prior families and their parameters.

    Failure Modes:
        - ``f_nyq <= f_fun`` or ``f_fun <= 0`` in any dimension: ``ValueError``.
        - Non-positive standard deviations or an unknown frequency family:
          ``ValueError``.
    """

    q_components: int
    dims: int
    f_fun: np.ndarray
    f_nyq: np.ndarray
    weight_prior: tuple[float, float] = (0.0, 2.0)
    bandwidth_prior: tuple[float, float] = (0.0, 2.0)
    noise_prior: tuple[float, float] = (0.0, 2.0)
    freq_lognormal_sd: float = 7.0
    identifiability: bool = True
    frequency_family: str = "piecewise"
    frequency_lognormal: tuple[float, float] = (0.0, 2.0)

    def __post_init__(self) -> None:
        f_fun = np.broadcast_to(np.asarray(self.f_fun, dtype=float), (self.dims,)).copy()
        f_nyq = np.broadcast_to(np.asarray(self.f_nyq, dtype=float), (self.dims,)).copy()
        f_fun.setflags(write=False)
        f_nyq.setflags(write=False)
        object.__setattr__(self, "f_fun", f_fun)
        object.__setattr__(self, "f_nyq", f_nyq)
        if self.q_components < 1 or self.dims < 1:
            raise ValueError("q_components and dims must be at least 1")
        if np.any(f_fun <= 0) or np.any(f_nyq <= f_fun):
            raise ValueError("frequency bounds must satisfy f_nyq > f_fun > 0 in every dimension")
        for label in ("weight_prior", "bandwidth_prior", "noise_prior", "frequency_lognormal"):
            mean, sd = getattr(self, label)
            if not sd > 0:
                raise ValueError(f"{label} standard deviation must be positive")
            object.__setattr__(self, label, (float(mean), float(sd)))
        if not self.freq_lognormal_sd > 0:
            raise ValueError("freq_lognormal_sd must be positive")
        if self.frequency_family not in FREQUENCY_FAMILIES:
            raise ValueError(f"frequency_family must be one of {FREQUENCY_FAMILIES}")

    @property
    def n_params(self) -> int:
        return vector_length(self.q_components, self.dims)

    @classmethod
    def from_config(
        cls,
        config: "PriorConfig",
        q: int,
        f_fun: Sequence[float] | np.ndarray,
        f_nyq: Sequence[float] | np.ndarray,
        default_family: str = "piecewise",
    ) -> "PriorSpec":
        f_fun = np.atleast_1d(np.asarray(f_fun, dtype=float))
        return cls(
            q_components=q,
            dims=int(f_fun.shape[0]),
            f_fun=f_fun,
            f_nyq=np.atleast_1d(np.asarray(f_nyq, dtype=float)),
            weight_prior=config.weight,
            bandwidth_prior=config.bandwidth,
            noise_prior=config.noise,
            freq_lognormal_sd=config.freq_lognormal_sd,
            identifiability=config.identifiability,
            frequency_family=config.frequency_family or default_family,
            frequency_lognormal=config.frequency_lognormal,
        )

    def frequency_slice(self) -> slice:
        qd = self.q_components * self.dims
        return slice(self.q_components, self.q_components + qd)


def lognormal_inverse_cdf(u: np.ndarray | float, mean: float, sd: float) -> np.ndarray:
    """Quantile of LogNormal(mean, sd): ``exp(mean + sd * ndtri(u))``."""
    u = np.asarray(u, dtype=float)
    _check_unit_interval(u)
    return np.exp(mean + sd * ndtri(_open(u)))


def freq_prior_inverse_cdf(
    u: np.ndarray | float, f_fun: float, f_nyq: float, lognormal_sd: float = 7.0
) -> np.ndarray | float:
    """Quantile function of the piecewise frequency prior.

    ``u < 1/2`` maps to ``f_fun * exp(sd * ndtri(u))``, the lower half of a
    LogNormal(0, sd) in units of ``f_fun``; ``u >= 1/2`` maps linearly onto
    ``[f_fun, f_nyq]``.

    Failure Modes:
        - ``u`` outside ``[0, 1]``: ``ValueError``.
        - ``f_nyq <= f_fun``: ``ValueError``.
    """

    if not f_nyq > f_fun > 0:
        raise ValueError("frequency bounds must satisfy f_nyq > f_fun > 0")
    u_arr = np.asarray(u, dtype=float)
    _check_unit_interval(u_arr)
    lower = f_fun * np.exp(lognormal_sd * ndtri(_open(np.minimum(u_arr, 0.5))))
    upper = f_fun * (1.0 + 2.0 * (u_arr - 0.5) * (f_nyq / f_fun - 1.0))
    result = np.where(u_arr < 0.5, lower, upper)
    if result.ndim == 0:
        return float(result)
    return result


def freq_prior_cdf(mu: np.ndarray | float, f_fun: float, f_nyq: float, lognormal_sd: float = 7.0) -> np.ndarray:
    """Forward CDF of the piecewise frequency prior."""
    mu = np.asarray(mu, dtype=float)
    with np.errstate(divide="ignore"):
        lower = ndtr(np.log(np.maximum(mu, 0.0) / f_fun) / lognormal_sd)
    upper = 0.5 + 0.5 * (mu - f_fun) / (f_nyq - f_fun)
    return np.clip(np.where(mu < f_fun, lower, upper), 0.0, 1.0)


def freq_prior_log_density(mu: np.ndarray | float, f_fun: float, f_nyq: float, lognormal_sd: float = 7.0) -> np.ndarray:
    """Log density of the piecewise frequency prior; ``-inf`` outside ``(0, f_nyq]``."""
    mu = np.asarray(mu, dtype=float)
    lower = lognorm.logpdf(mu, s=lognormal_sd, scale=f_fun)
    upper = np.full_like(mu, math.log(0.5 / (f_nyq - f_fun)))
    density = np.where(mu < f_fun, lower, upper)
    return np.where((mu > 0) & (mu <= f_nyq), density, -np.inf)


def ordered_uniforms(u: np.ndarray) -> np.ndarray:
    """Map independent uniforms to ascending order statistics.

    ``t_Q = u_Q^(1/Q)`` and ``t_q = t_(q+1) u_q^(1/q)``.
    """
    u = np.asarray(u, dtype=float)
    t = np.empty_like(u)
    count = u.shape[0]
    t[-1] = u[-1] ** (1.0 / count)
    for i in range(count - 2, -1, -1):
        t[i] = t[i + 1] * u[i] ** (1.0 / (i + 1))
    return t


def unordered_uniforms(t: np.ndarray) -> np.ndarray:
    """Inverse of :func:`ordered_uniforms`."""
    t = np.asarray(t, dtype=float)
    u = np.empty_like(t)
    count = t.shape[0]
    u[-1] = t[-1] ** count
    for i in range(count - 2, -1, -1):
        u[i] = (t[i] / t[i + 1]) ** (i + 1) if t[i + 1] > 0 else 0.0
    return u


def _frequency_inverse_cdf(u: np.ndarray, spec: PriorSpec, dim: int) -> np.ndarray:
    f_fun = float(spec.f_fun[dim])
    f_nyq = float(spec.f_nyq[dim])
    if spec.frequency_family == "piecewise":
        return np.asarray(freq_prior_inverse_cdf(u, f_fun, f_nyq, spec.freq_lognormal_sd))
    if spec.frequency_family == "lognormal":
        mean, sd = spec.frequency_lognormal
        return f_fun * lognormal_inverse_cdf(u, mean, sd)
    return np.maximum(u, _U_MIN) * f_nyq


def _frequency_cdf(mu: np.ndarray, spec: PriorSpec, dim: int) -> np.ndarray:
    f_fun = float(spec.f_fun[dim])
    f_nyq = float(spec.f_nyq[dim])
    if spec.frequency_family == "piecewise":
        return freq_prior_cdf(mu, f_fun, f_nyq, spec.freq_lognormal_sd)
    if spec.frequency_family == "lognormal":
        mean, sd = spec.frequency_lognormal
        return ndtr((np.log(mu / f_fun) - mean) / sd)
    return np.clip(mu / f_nyq, 0.0, 1.0)


def _frequency_log_density(mu: np.ndarray, spec: PriorSpec, dim: int) -> np.ndarray:
    f_fun = float(spec.f_fun[dim])
    f_nyq = float(spec.f_nyq[dim])
    if spec.frequency_family == "piecewise":
        return freq_prior_log_density(mu, f_fun, f_nyq, spec.freq_lognormal_sd)
    if spec.frequency_family == "lognormal":
        mean, sd = spec.frequency_lognormal
        return lognorm.logpdf(mu, s=sd, scale=f_fun * math.exp(mean))
    return np.where((mu > 0) & (mu <= f_nyq), -math.log(f_nyq), -np.inf)


def unit_cube_transform(u: np.ndarray, spec: PriorSpec) -> SmHyperParams:
    """Map a point of the unit hypercube to hyperparameters distributed as the prior.

    Failure Modes:
        - Wrong length or coordinates outside ``[0, 1]``: ``ValueError``.
    """

    u = np.asarray(u, dtype=float)
    if u.shape != (spec.n_params,):
        raise ValueError(f"cube point must have length {spec.n_params}, got shape {u.shape}")
    _check_unit_interval(u)
    q, dims = spec.q_components, spec.dims
    qd = q * dims
    weights = lognormal_inverse_cdf(u[:q], *spec.weight_prior)
    freq_coords = u[q : q + qd].reshape(q, dims).copy()
    if spec.identifiability and q > 1:
        freq_coords[:, 0] = ordered_uniforms(freq_coords[:, 0])
    mean_freqs = np.column_stack(
        [_frequency_inverse_cdf(freq_coords[:, d], spec, d) for d in range(dims)]
    )
    bandwidths = lognormal_inverse_cdf(u[q + qd : q + 2 * qd], *spec.bandwidth_prior).reshape(q, dims)
    noise = float(lognormal_inverse_cdf(u[-1], *spec.noise_prior))
    return SmHyperParams.from_arrays(weights, mean_freqs, bandwidths, noise)


def params_to_unit_cube(params: SmHyperParams, spec: PriorSpec) -> np.ndarray:
    """Forward prior CDFs: the inverse of :func:`unit_cube_transform`."""

    q, dims = spec.q_components, spec.dims
    weight_mean, weight_sd = spec.weight_prior
    band_mean, band_sd = spec.bandwidth_prior
    noise_mean, noise_sd = spec.noise_prior
    weights = ndtr((np.log(params.weights) - weight_mean) / weight_sd)
    freq_coords = np.column_stack(
        [_frequency_cdf(params.mean_freqs[:, d], spec, d) for d in range(dims)]
    )
    if spec.identifiability and q > 1:
        freq_coords[:, 0] = unordered_uniforms(freq_coords[:, 0])
    bandwidths = ndtr((np.log(params.bandwidths) - band_mean) / band_sd)
    noise = ndtr((math.log(params.noise_variance) - noise_mean) / noise_sd)
    return np.concatenate([weights, freq_coords.ravel(), bandwidths.ravel(), [noise]])


def log_prior_density(params: SmHyperParams, spec: PriorSpec) -> float:
    """Sum of per-hyperparameter log densities; ``-inf`` outside the support.

    With identifiability on, the first-dimension frequencies must be
    non-decreasing and the density carries the ``log Q!`` factor of the
    ordered region.
    """

    if params.q != spec.q_components or params.dims != spec.dims:
        raise ValueError("params do not match the prior's component count or dimension")
    total = float(np.sum(lognorm.logpdf(params.weights, s=spec.weight_prior[1], scale=math.exp(spec.weight_prior[0]))))
    total += float(
        np.sum(lognorm.logpdf(params.bandwidths, s=spec.bandwidth_prior[1], scale=math.exp(spec.bandwidth_prior[0])))
    )
    total += float(
        lognorm.logpdf(params.noise_variance, s=spec.noise_prior[1], scale=math.exp(spec.noise_prior[0]))
    )
    mean_freqs = params.mean_freqs
    for d in range(spec.dims):
        total += float(np.sum(_frequency_log_density(mean_freqs[:, d], spec, d)))
    if spec.identifiability and spec.q_components > 1:
        if np.any(np.diff(mean_freqs[:, 0]) < 0):
            return -math.inf
        total += float(gammaln(spec.q_components + 1))
    return total


def to_unconstrained(params: SmHyperParams) -> np.ndarray:
    """Log of every hyperparameter, in the block layout."""
    with np.errstate(divide="ignore"):
        return np.log(params.to_vector())


def from_unconstrained(z: np.ndarray, q: int, dims: int) -> SmHyperParams:
    return SmHyperParams.from_vector(np.exp(np.asarray(z, dtype=float)), q, dims)


def unconstrained_log_prior(z: np.ndarray, spec: PriorSpec) -> tuple[float, np.ndarray]:
    """Log prior density of ``z = log(theta)`` including the log-Jacobian, with its gradient."""

    z = np.asarray(z, dtype=float)
    if z.shape != (spec.n_params,):
        raise ValueError(f"expected a vector of length {spec.n_params}")
    q, dims = spec.q_components, spec.dims
    qd = q * dims
    gradient = np.empty_like(z)
    try:
        params = from_unconstrained(z, q, dims)
    except ValueError:
        return -math.inf, np.zeros_like(z)
    value = log_prior_density(params, spec) + float(np.sum(z))
    if not math.isfinite(value):
        return -math.inf, np.zeros_like(z)

    for block, (mean, sd) in (
        (slice(0, q), spec.weight_prior),
        (slice(q + qd, q + 2 * qd), spec.bandwidth_prior),
        (slice(-1, None), spec.noise_prior),
    ):
        gradient[block] = -(z[block] - mean) / sd**2

    log_mu = z[q : q + qd].reshape(q, dims)
    freq_grad = np.empty((q, dims))
    for d in range(dims):
        log_f_fun = math.log(float(spec.f_fun[d]))
        if spec.frequency_family == "piecewise":
            below = log_mu[:, d] < log_f_fun
            freq_grad[:, d] = np.where(below, -(log_mu[:, d] - log_f_fun) / spec.freq_lognormal_sd**2, 1.0)
        elif spec.frequency_family == "lognormal":
            mean, sd = spec.frequency_lognormal
            freq_grad[:, d] = -(log_mu[:, d] - log_f_fun - mean) / sd**2
        else:
            freq_grad[:, d] = 1.0
    gradient[q : q + qd] = freq_grad.ravel()
    return value, gradient


__all__ = [
    "FREQUENCY_FAMILIES",
    "PriorSpec",
    "freq_prior_cdf",
    "freq_prior_inverse_cdf",
    "freq_prior_log_density",
    "from_unconstrained",
    "log_prior_density",
    "lognormal_inverse_cdf",
    "ordered_uniforms",
    "params_to_unit_cube",
    "to_unconstrained",
    "unconstrained_log_prior",
    "unit_cube_transform",
    "unordered_uniforms",
]
