"""Configuration loader for experiments and inference methods.

The YAML schema mirrors the experiment fields one to one: top-level keys are
``ExperimentConfig`` fields, and each inference method or task reads its own
nested mapping. A flat file with only top-level keys is valid; every section
falls back to its defaults. Each section exposes an explicit ``from_dict``
constructor so callers can validate external configuration before any
sampling starts.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

TASKS = ("synthetic", "timeseries", "pattern2d")
METHODS = ("ml2", "hmc", "nested")
DEFAULT_Q = {"synthetic": 2, "timeseries": 7, "pattern2d": 10}
THREADS_ENV = "MGPNS_THREADS"


def _log_normal_pair(value: Any, label: str) -> tuple[float, float]:
    if isinstance(value, Mapping):
        pair = (float(value.get("mean", 0.0)), float(value.get("sd", 2.0)))
    else:
        items = list(value)
        if len(items) != 2:
            raise ValueError(f"{label} must be a (mean, sd) pair")
        pair = (float(items[0]), float(items[1]))
    if pair[1] <= 0:
        raise ValueError(f"{label} standard deviation must be positive")
    return pair


def _positive_int(payload: Mapping[str, Any], key: str, default: int) -> int:
    value = int(payload.get(key, default))
    if value <= 0:
        raise ValueError(f"{key} must be positive")
    return value


@dataclass(frozen=True)
class PriorConfig:
    """Hyperprior settings.

    ``frequency_family`` left unset lets each method pick its default: the
    piecewise prior for nested sampling and the log-normal prior for HMC.
    """

    weight: tuple[float, float] = (0.0, 2.0)
    bandwidth: tuple[float, float] = (0.0, 2.0)
    noise: tuple[float, float] = (0.0, 2.0)
    freq_lognormal_sd: float = 7.0
    identifiability: bool = True
    frequency_family: str | None = None
    frequency_lognormal: tuple[float, float] = (0.0, 2.0)

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "PriorConfig":
        payload = payload or {}
        family = payload.get("frequency_family")
        if family is not None and family not in ("piecewise", "lognormal", "uniform"):
            raise ValueError(f"unknown frequency_family: {family}")
        sd = float(payload.get("freq_lognormal_sd", 7.0))
        if sd <= 0:
            raise ValueError("freq_lognormal_sd must be positive")
        return cls(
            weight=_log_normal_pair(payload.get("weight", (0.0, 2.0)), "weight"),
            bandwidth=_log_normal_pair(payload.get("bandwidth", (0.0, 2.0)), "bandwidth"),
            noise=_log_normal_pair(payload.get("noise", (0.0, 2.0)), "noise"),
            freq_lognormal_sd=sd,
            identifiability=bool(payload.get("identifiability", True)),
            frequency_family=None if family is None else str(family),
            frequency_lognormal=_log_normal_pair(
                payload.get("frequency_lognormal", (0.0, 2.0)), "frequency_lognormal"
            ),
        )


@dataclass(frozen=True)
class NestedConfig:
    """Nested sampling settings.

    Failure Modes:
        - ``live_points < 2`` or ``stop_fraction`` outside (0, 1): ``ValueError``.
    """

    live_points: int = 100
    slices: int = 5
    stop_fraction: float = 0.01
    runs: int = 1
    max_iterations: int = 100_000
    max_shrinks: int = 1_000_000
    write_trace: bool = False

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "NestedConfig":
        payload = payload or {}
        live_points = int(payload.get("live_points", 100))
        if live_points < 2:
            raise ValueError("live_points must be at least 2")
        stop_fraction = float(payload.get("stop_fraction", 0.01))
        if not 0 < stop_fraction < 1:
            raise ValueError("stop_fraction must be between 0 and 1")
        return cls(
            live_points=live_points,
            slices=_positive_int(payload, "slices", 5),
            stop_fraction=stop_fraction,
            runs=_positive_int(payload, "runs", 1),
            max_iterations=_positive_int(payload, "max_iterations", 100_000),
            max_shrinks=_positive_int(payload, "max_shrinks", 1_000_000),
            write_trace=bool(payload.get("write_trace", False)),
        )


@dataclass(frozen=True)
class HmcConfig:
    """Hamiltonian Monte Carlo settings.

    Failure Modes:
        - Non-positive counts or ``target_accept`` outside (0, 1): ``ValueError``.
    """

    n_warmup: int = 500
    n_samples: int = 500
    target_accept: float = 0.8
    path_length: int = 20
    path_jitter: float = 0.2
    chains: int = 1
    rng_seed: int = 0
    initial_step_size: float = 0.05
    write_trace: bool = False

    def __post_init__(self) -> None:
        for label in ("n_warmup", "n_samples", "path_length", "chains"):
            if getattr(self, label) <= 0:
                raise ValueError(f"{label} must be positive")
        if not 0 < self.target_accept < 1:
            raise ValueError("target_accept must be between 0 and 1")
        if not 0 <= self.path_jitter < 1:
            raise ValueError("path_jitter must be in [0, 1)")
        if not self.initial_step_size > 0:
            raise ValueError("initial_step_size must be positive")

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "HmcConfig":
        payload = payload or {}
        return cls(
            n_warmup=int(payload.get("n_warmup", 500)),
            n_samples=int(payload.get("n_samples", 500)),
            target_accept=float(payload.get("target_accept", 0.8)),
            path_length=int(payload.get("path_length", 20)),
            path_jitter=float(payload.get("path_jitter", 0.2)),
            chains=int(payload.get("chains", 1)),
            rng_seed=int(payload.get("rng_seed", 0)),
            initial_step_size=float(payload.get("initial_step_size", 0.05)),
            write_trace=bool(payload.get("write_trace", False)),
        )


@dataclass(frozen=True)
class Ml2Config:
    """Type-II maximum likelihood settings."""

    n_restarts: int = 5
    max_iters: int = 2000
    learning_rate: float = 0.05
    rng_seed: int = 0
    gradient_tolerance: float = 1e-6

    def __post_init__(self) -> None:
        if self.n_restarts <= 0 or self.max_iters <= 0:
            raise ValueError("n_restarts and max_iters must be positive")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "Ml2Config":
        payload = payload or {}
        return cls(
            n_restarts=int(payload.get("n_restarts", 5)),
            max_iters=int(payload.get("max_iters", 2000)),
            learning_rate=float(payload.get("learning_rate", 0.05)),
            rng_seed=int(payload.get("rng_seed", 0)),
            gradient_tolerance=float(payload.get("gradient_tolerance", 1e-6)),
        )


@dataclass(frozen=True)
class SyntheticConfig:
    preset: str = "default"
    n_train: int = 10
    n_test: int = 100
    noise_sd: float = 0.1
    domain: tuple[float, float] = (-1.0, 1.0)

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "SyntheticConfig":
        payload = payload or {}
        low, high = (float(v) for v in payload.get("domain", (-1.0, 1.0)))
        if not high > low:
            raise ValueError("domain must be an increasing interval")
        n_train = int(payload.get("n_train", 10))
        if n_train < 2:
            raise ValueError("n_train must be at least 2")
        noise_sd = float(payload.get("noise_sd", 0.1))
        if noise_sd < 0:
            raise ValueError("noise_sd must be non-negative")
        return cls(
            preset=str(payload.get("preset", "default")),
            n_train=n_train,
            n_test=_positive_int(payload, "n_test", 100),
            noise_sd=noise_sd,
            domain=(low, high),
        )


@dataclass(frozen=True)
class Pattern2dConfig:
    n_train: int = 50
    grid: int = 20
    extent: float = 6.0

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "Pattern2dConfig":
        payload = payload or {}
        extent = float(payload.get("extent", 6.0))
        if extent <= 0:
            raise ValueError("extent must be positive")
        return cls(
            n_train=_positive_int(payload, "n_train", 50),
            grid=_positive_int(payload, "grid", 20),
            extent=extent,
        )


@dataclass(frozen=True)
class LoggingConfig:
    level: str = "INFO"
    file: Path | None = None

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "LoggingConfig":
        payload = payload or {}
        file = payload.get("file")
        return cls(
            level=str(payload.get("level", "INFO")).upper(),
            file=Path(file) if file else None,
        )


@dataclass(frozen=True)
class ExperimentConfig:
    """Top-level immutable experiment configuration.

    Failure Modes:
        - Unknown task or method: ``ValueError`` naming the offending value.
        - ``split_fraction`` outside (0, 1) or ``q_components < 1``: ``ValueError``.
        - Time-series task without data paths: ``ValueError``.
    """

    task: str = "synthetic"
    methods: tuple[str, ...] = ("ml2",)
    q_components: int = 2
    data_paths: tuple[Path, ...] = ()
    split_fraction: float = 0.6
    seeds: tuple[int, ...] = (0,)
    mixture_components: int = 200
    quantile_draws: int = 10_000
    coverage_level: float = 0.95
    workers: int | None = None
    output_dir: Path = Path("results")
    priors: PriorConfig = field(default_factory=PriorConfig)
    nested: NestedConfig = field(default_factory=NestedConfig)
    hmc: HmcConfig = field(default_factory=HmcConfig)
    ml2: Ml2Config = field(default_factory=Ml2Config)
    synthetic: SyntheticConfig = field(default_factory=SyntheticConfig)
    pattern2d: Pattern2dConfig = field(default_factory=Pattern2dConfig)
    logging: LoggingConfig = field(default_factory=LoggingConfig)

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "ExperimentConfig":
        payload = payload or {}
        task = str(payload.get("task", "synthetic"))
        if task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}, got {task!r}")
        raw_methods = payload.get("methods", payload.get("method", "ml2"))
        methods = (raw_methods,) if isinstance(raw_methods, str) else tuple(raw_methods)
        unknown = [method for method in methods if method not in METHODS]
        if unknown or not methods:
            raise ValueError(f"methods must be drawn from {METHODS}, got {list(methods)}")
        q = int(payload.get("q_components", DEFAULT_Q[task]))
        if q < 1:
            raise ValueError("q_components must be at least 1")
        split_fraction = float(payload.get("split_fraction", 0.6))
        if not 0 < split_fraction < 1:
            raise ValueError("split_fraction must be between 0 and 1")
        raw_paths = payload.get("data_paths", payload.get("data_path", ()))
        if isinstance(raw_paths, (str, Path)):
            raw_paths = (raw_paths,)
        data_paths = tuple(Path(path) for path in raw_paths)
        if task == "timeseries" and not data_paths:
            raise ValueError("the timeseries task needs at least one data path")
        raw_seeds = payload.get("seeds", (0,))
        seeds = (int(raw_seeds),) if isinstance(raw_seeds, int) else tuple(int(s) for s in raw_seeds)
        if not seeds:
            raise ValueError("seeds must not be empty")
        coverage_level = float(payload.get("coverage_level", 0.95))
        if not 0 < coverage_level < 1:
            raise ValueError("coverage_level must be between 0 and 1")
        quantile_draws = int(payload.get("quantile_draws", 10_000))
        if quantile_draws < 100:
            raise ValueError("quantile_draws must be at least 100")
        workers = payload.get("workers")
        return cls(
            task=task,
            methods=methods,
            q_components=q,
            data_paths=data_paths,
            split_fraction=split_fraction,
            seeds=seeds,
            mixture_components=_positive_int(payload, "mixture_components", 200),
            quantile_draws=quantile_draws,
            coverage_level=coverage_level,
            workers=None if workers is None else int(workers),
            output_dir=Path(payload.get("output_dir", "results")),
            priors=PriorConfig.from_dict(payload.get("priors", {})),
            nested=NestedConfig.from_dict(payload.get("nested", {})),
            hmc=HmcConfig.from_dict(payload.get("hmc", {})),
            ml2=Ml2Config.from_dict(payload.get("ml2", {})),
            synthetic=SyntheticConfig.from_dict(payload.get("synthetic", {})),
            pattern2d=Pattern2dConfig.from_dict(payload.get("pattern2d", {})),
            logging=LoggingConfig.from_dict(payload.get("logging", {})),
        )


DEFAULT_CONFIG = ExperimentConfig.from_dict({"task": "synthetic", "methods": ["ml2", "hmc", "nested"]})


def resolve_workers(config: ExperimentConfig) -> int:
    """Worker pool size: ``MGPNS_THREADS`` first, then the config, then the CPU count."""

    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            value = int(raw)
        except ValueError as exc:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {raw!r}") from exc
        if value > 0:
            return value
    if config.workers is not None and config.workers > 0:
        return config.workers
    return max(1, os.cpu_count() or 1)


def load_config(path: Path | str) -> ExperimentConfig:
    """Read a YAML experiment file into an :class:`ExperimentConfig`.

    Top-level keys select the task, methods, seeds and output directory;
    the ``priors``, ``nested``, ``hmc``, ``ml2``, ``synthetic``, ``pattern2d``
    and ``logging`` mappings fill the matching sections and fall back to
    their defaults when absent. ``q_components`` defaults per task.

    Failure Modes:
        - No file at ``path``: ``FileNotFoundError``; there is no silent
          fallback to :data:`DEFAULT_CONFIG`.
        - Malformed YAML: ``yaml.YAMLError``.
        - A non-mapping document, unknown task or method, or an out-of-range
          section value: ``ValueError`` from the section's ``from_dict``.
    """

    return ExperimentConfig.from_dict(read_config_payload(path))


def read_config_payload(path: Path | str) -> dict[str, Any]:
    """Raw YAML mapping of a configuration file, before validation."""

    config_path = Path(path)
    with config_path.open("r", encoding="utf-8") as handle:
        payload = yaml.safe_load(handle) or {}
    if not isinstance(payload, Mapping):
        raise ValueError(f"{config_path} must contain a mapping at the top level")
    return dict(payload)


__all__ = [
    "DEFAULT_CONFIG",
    "DEFAULT_Q",
    "ExperimentConfig",
    "HmcConfig",
    "LoggingConfig",
    "METHODS",
    "Ml2Config",
    "NestedConfig",
    "Pattern2dConfig",
    "PriorConfig",
    "SyntheticConfig",
    "TASKS",
    "THREADS_ENV",
    "load_config",
    "read_config_payload",
    "resolve_workers",
]
