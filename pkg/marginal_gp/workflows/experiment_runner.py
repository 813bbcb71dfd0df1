"""Runs every dataset x seed x method cell of an experiment and collects the rows."""
from __future__ import annotations

import hashlib
import logging
import math
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from itertools import product
from pathlib import Path
from typing import Sequence

import numpy as np

from ..bench.datasets import (
    apply_normalization,
    chrono_split,
    load_series,
    normalize,
    pattern2d_generate,
    preset_params,
    random_split,
    synth_generate,
)
from ..bench.report import PredictionTable, ResultRow
from ..config import ExperimentConfig, resolve_workers
from ..errors import DegenerateData
from ..evaluation.predictive import central_interval, coverage, mixture_predict, pointwise_nlpd
from ..gp.dataset import Dataset
from ..gp.regression import log_marginal_likelihood
from ..kernels.spectral_mixture import SmHyperParams
from ..logging_utils import log_event, log_metric
from ..priors.hyperpriors import PriorSpec
from ..samplers.hmc import hmc_run, write_hmc_trace
from ..samplers.nested import resample_equal, run_nested_multi, write_nested_trace
from ..training.ml2 import ml2_train

TRACES_DIR = "traces"


@dataclass(frozen=True, eq=False)
class TaskData:
    """Normalised training set and the test set in both unit systems."""

    name: str
    train: Dataset
    test: Dataset
    test_raw: Dataset


@dataclass(frozen=True, eq=False)
class RunOutcome:
    rows: list[ResultRow]
    predictions: list[PredictionTable]


def thin(samples: Sequence[SmHyperParams], m: int) -> list[SmHyperParams]:
    """Every ``ceil(len(samples) / m)``-th sample."""
    step = max(1, math.ceil(len(samples) / m))
    return list(samples[::step])


class ExperimentRunner:
    """Coordinator used by the CLI and the tests."""

    def __init__(self, config: ExperimentConfig, workers: int | None = None) -> None:
        self.config = config
        self.workers = workers or resolve_workers(config)
        self.labels = self.dataset_labels()

    def dataset_keys(self) -> list[str]:
        if self.config.task == "timeseries":
            return [str(path) for path in self.config.data_paths]
        if self.config.task == "synthetic":
            return [f"synthetic-{self.config.synthetic.preset}"]
        return ["pattern2d"]

    def dataset_labels(self) -> dict[str, str]:
        """Row and file label of every dataset key.

        Series sharing a file stem are prefixed with their parent directory,
        and suffixed with a digest of the full path if that still collides.
        """

        keys = self.dataset_keys()
        if self.config.task != "timeseries":
            return {key: key for key in keys}
        stems = Counter(Path(key).stem for key in keys)
        labels: dict[str, str] = {}
        for key in keys:
            path = Path(key)
            labels[key] = path.stem if stems[path.stem] == 1 else f"{path.parent.name}-{path.stem}"
        repeated = Counter(labels.values())
        for key, label in labels.items():
            if repeated[label] > 1:
                digest = hashlib.sha1(str(Path(key).resolve()).encode("utf-8")).hexdigest()[:8]
                labels[key] = f"{label}-{digest}"
        return labels

    def prepare(self, key: str, seed: int) -> TaskData:
        """Build the split for one dataset and seed; statistics come from training data only."""

        cfg = self.config
        rng = np.random.default_rng(seed)
        if cfg.task == "timeseries":
            train_raw, test_raw = chrono_split(load_series(key), cfg.split_fraction)
        elif cfg.task == "synthetic":
            synthetic = cfg.synthetic
            data, _ = synth_generate(
                preset_params(synthetic.preset, synthetic.noise_sd),
                synthetic.n_train + synthetic.n_test,
                synthetic.noise_sd,
                synthetic.domain,
                rng,
                name=key,
            )
            train_raw, test_raw = random_split(data, synthetic.n_train, rng)
        else:
            train_raw, test_raw = pattern2d_generate(
                cfg.pattern2d.n_train, cfg.pattern2d.grid, rng, extent=cfg.pattern2d.extent
            )
        train = normalize(train_raw)
        return TaskData(
            name=self.labels.get(key, train.name),
            train=train,
            test=apply_normalization(test_raw, train),
            test_raw=test_raw,
        )

    def _prior(self, train: Dataset, default_family: str) -> PriorSpec:
        """Prior over the normalised training inputs, where ``f_fun = 1``.

        Failure Modes:
            - Training inputs too few or too sparse for the Nyquist frequency
              to exceed the fundamental frequency: ``DegenerateData``.
        """

        if np.any(train.nyquist_freq <= train.fundamental_freq):
            raise DegenerateData(
                f"{train.name}: Nyquist frequency {train.nyquist_freq.tolist()} does not exceed the "
                f"fundamental frequency {train.fundamental_freq.tolist()}; the training split has too "
                "few distinct inputs for a frequency prior"
            )
        return PriorSpec.from_config(
            self.config.priors,
            self.config.q_components,
            train.fundamental_freq,
            train.nyquist_freq,
            default_family=default_family,
        )

    def _trace_path(self, task: TaskData, method: str, seed: int) -> Path:
        return self.config.output_dir / TRACES_DIR / f"{task.name}__{method}__seed{seed}.csv"

    def infer(
        self, method: str, task: TaskData, seed: int, workers: int
    ) -> tuple[list[SmHyperParams], float | None]:
        """Hyperparameter samples (equally weighted) and, for nested sampling, the log evidence."""

        cfg = self.config
        q = cfg.q_components
        train = task.train
        if method == "ml2":
            ml2_cfg = replace(cfg.ml2, rng_seed=cfg.ml2.rng_seed + seed)
            params, _ = ml2_train(train, q, ml2_cfg, workers=workers, f_nyq=train.nyquist_freq)
            return [params], None
        if method == "hmc":
            hmc_cfg = replace(cfg.hmc, rng_seed=cfg.hmc.rng_seed + seed)
            trace = hmc_run(train, self._prior(train, "lognormal"), q, hmc_cfg, workers=workers)
            if hmc_cfg.write_trace:
                write_hmc_trace(trace, self._trace_path(task, method, seed))
            return thin(trace.samples, cfg.mixture_components), None

        nested = cfg.nested
        posterior = run_nested_multi(
            lambda params: log_marginal_likelihood(train, params),
            self._prior(train, "piecewise"),
            nested.runs,
            rng_seed=seed,
            workers=workers,
            n_live=nested.live_points,
            stop_frac=nested.stop_fraction,
            n_slices=nested.slices,
            max_iterations=nested.max_iterations,
            max_shrinks=nested.max_shrinks,
        )
        if nested.write_trace:
            write_nested_trace(posterior, self._trace_path(task, method, seed))
        log_event(
            "nested_done",
            {
                "dataset": task.name,
                "seed": seed,
                "log_evidence": posterior.log_evidence,
                "log_evidence_error": posterior.log_evidence_error,
                "iterations": posterior.n_iterations,
            },
        )
        samples = resample_equal(posterior, cfg.mixture_components, np.random.default_rng(seed))
        return samples, posterior.log_evidence

    def run_cell(self, key: str, seed: int, method: str, workers: int = 1) -> tuple[ResultRow, PredictionTable | None]:
        """One cell; any failure is recorded in the row instead of raised."""

        cfg = self.config
        label = self.labels.get(key, Path(key).stem)
        log_event("cell_start", {"dataset": label, "method": method, "seed": seed})
        try:
            task = self.prepare(key, seed)
            started = time.perf_counter()
            samples, log_evidence = self.infer(method, task, seed, workers)
            wall_seconds = time.perf_counter() - started

            norm = task.train.norm_record
            mixture = mixture_predict(task.train, samples, task.test.inputs)
            y_true = task.test_raw.targets
            per_point = pointwise_nlpd(mixture, y_true, norm)
            lower, upper = central_interval(
                mixture, cfg.coverage_level, cfg.quantile_draws, np.random.default_rng(seed), norm
            )
        except Exception as exc:  # noqa: BLE001
            log_event(
                "cell_failed",
                {"dataset": label, "method": method, "seed": seed, "error": repr(exc)},
                level=logging.ERROR,
            )
            row = ResultRow(
                dataset=label,
                method=method,
                seed=seed,
                nlpd=math.nan,
                coverage95=math.nan,
                wall_seconds=0.0,
                error=f"{type(exc).__name__}: {exc}",
            )
            return row, None

        row = ResultRow(
            dataset=task.name,
            method=method,
            seed=seed,
            nlpd=float(np.mean(per_point)),
            coverage95=coverage((lower, upper), y_true),
            wall_seconds=wall_seconds,
            log_evidence=log_evidence,
        )
        metadata = {"dataset": row.dataset, "method": method, "seed": seed}
        log_metric("nlpd", row.nlpd, metadata)
        log_metric("coverage95", row.coverage95, metadata)
        log_metric("wall_seconds", row.wall_seconds, metadata)
        table = PredictionTable(
            dataset=task.name,
            method=method,
            seed=seed,
            inputs=task.test_raw.inputs,
            y_true=y_true,
            mean=mixture.mean(norm),
            lower=lower,
            upper=upper,
            nlpd=per_point,
        )
        return row, table

    def run(self) -> RunOutcome:
        cfg = self.config
        cells = list(product(self.dataset_keys(), cfg.seeds, cfg.methods))
        inner_workers = max(1, self.workers // len(cells))
        with ThreadPoolExecutor(max_workers=max(1, min(self.workers, len(cells)))) as pool:
            results = list(pool.map(lambda cell: self.run_cell(*cell, workers=inner_workers), cells))
        results.sort(key=lambda result: (result[0].dataset, result[0].method, result[0].seed))
        return RunOutcome(
            rows=[row for row, _ in results],
            predictions=[table for _, table in results if table is not None],
        )


def run_experiment(cfg: ExperimentConfig) -> list[ResultRow]:
    return ExperimentRunner(cfg).run().rows


__all__ = ["ExperimentRunner", "RunOutcome", "TaskData", "run_experiment", "thin"]
