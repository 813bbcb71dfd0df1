"""Benchmark result rows and the CSV report files built from them."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from ..logging_utils import log_event

RESULTS_FILE = "results.csv"
SUMMARY_FILE = "summary.csv"
TIMING_FILE = "timing.csv"
PREDICTIONS_DIR = "predictions"


@dataclass(frozen=True)
class ResultRow:
    """Outcome of one dataset x method x seed cell.

    ``log_evidence`` is only set for nested sampling; ``error`` holds the
    failure message of a cell that did not finish, whose scores are NaN.
    """

    dataset: str
    method: str
    seed: int
    nlpd: float
    coverage95: float
    wall_seconds: float
    log_evidence: float | None = None
    error: str | None = None

    def __post_init__(self) -> None:
        if self.wall_seconds < 0:
            raise ValueError("wall_seconds must be non-negative")

    @property
    def ok(self) -> bool:
        return self.error is None and math.isfinite(self.nlpd)


@dataclass(frozen=True)
class SummaryRow:
    dataset: str
    method: str
    n_runs: int
    nlpd_mean: float
    nlpd_se: float
    coverage95_mean: float
    coverage95_se: float
    wall_seconds_mean: float


@dataclass(frozen=True, eq=False)
class PredictionTable:
    """Per-test-point predictions of one cell, in original units."""

    dataset: str
    method: str
    seed: int
    inputs: np.ndarray
    y_true: np.ndarray
    mean: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    nlpd: np.ndarray

    @property
    def filename(self) -> str:
        return f"{self.dataset}__{self.method}__seed{self.seed}.csv"


def _cell(value: object) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _optional_float(text: str) -> float | None:
    return float(text) if text != "" else None


def _mean_and_se(values: Sequence[float]) -> tuple[float, float]:
    array = np.asarray(values, dtype=float)
    if array.size == 1:
        return float(array[0]), 0.0
    return float(np.mean(array)), float(np.std(array, ddof=1) / math.sqrt(array.size))


def summarize(rows: Iterable[ResultRow]) -> list[SummaryRow]:
    """Mean and standard error of NLPD and coverage per dataset and method over finished rows."""

    groups: dict[tuple[str, str], list[ResultRow]] = {}
    for row in rows:
        if row.ok:
            groups.setdefault((row.dataset, row.method), []).append(row)
    summary = []
    for (dataset, method), members in sorted(groups.items()):
        nlpd_mean, nlpd_se = _mean_and_se([row.nlpd for row in members])
        coverage_mean, coverage_se = _mean_and_se([row.coverage95 for row in members])
        summary.append(
            SummaryRow(
                dataset=dataset,
                method=method,
                n_runs=len(members),
                nlpd_mean=nlpd_mean,
                nlpd_se=nlpd_se,
                coverage95_mean=coverage_mean,
                coverage95_se=coverage_se,
                wall_seconds_mean=float(np.mean([row.wall_seconds for row in members])),
            )
        )
    return summary


def _write_csv(path: Path, header: Sequence[str], records: Iterable[Sequence[object]]) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(header)
            for record in records:
                writer.writerow([_cell(value) for value in record])
    except OSError as exc:
        raise OSError(f"failed to write {path}: {exc}") from exc
    return path


def write_predictions(table: PredictionTable, directory: Path | str) -> Path:
    dims = table.inputs.shape[1]
    header = [f"x{d}" for d in range(dims)] + ["y_true", "mean", "lower", "upper", "nlpd"]
    records = (
        [*(float(v) for v in table.inputs[i]), float(table.y_true[i]), float(table.mean[i]),
         float(table.lower[i]), float(table.upper[i]), float(table.nlpd[i])]
        for i in range(table.y_true.shape[0])
    )
    return _write_csv(Path(directory) / table.filename, header, records)


def emit_report(
    rows: Sequence[ResultRow],
    out_dir: Path | str,
    predictions: Iterable[PredictionTable] = (),
) -> dict[str, Path]:
    """Write ``results.csv``, ``summary.csv``, ``timing.csv`` and per-cell prediction files.

    Failure Modes:
        - Empty ``rows``: ``ValueError``.
        - Unwritable output location: ``OSError`` naming the path.
    """

    if not rows:
        raise ValueError("no result rows to report")
    out_dir = Path(out_dir)
    result_fields = [field.name for field in fields(ResultRow)]
    written = {
        "results": _write_csv(
            out_dir / RESULTS_FILE,
            result_fields,
            ([getattr(row, name) for name in result_fields] for row in rows),
        ),
        "summary": _write_csv(
            out_dir / SUMMARY_FILE,
            [field.name for field in fields(SummaryRow)],
            ([getattr(row, field.name) for field in fields(SummaryRow)] for row in summarize(rows)),
        ),
        "timing": _write_csv(
            out_dir / TIMING_FILE,
            ["dataset", "method", "seed", "wall_seconds"],
            ([row.dataset, row.method, row.seed, row.wall_seconds] for row in rows),
        ),
    }
    count = 0
    for table in predictions:
        write_predictions(table, out_dir / PREDICTIONS_DIR)
        count += 1
    log_event("report_written", {"out_dir": out_dir, "rows": len(rows), "prediction_files": count})
    return written


def load_results(path: Path | str) -> list[ResultRow]:
    """Parse a ``results.csv`` written by :func:`emit_report` back into rows."""

    path = Path(path)
    with path.open("r", newline="", encoding="utf-8") as handle:
        return [
            ResultRow(
                dataset=record["dataset"],
                method=record["method"],
                seed=int(record["seed"]),
                nlpd=float(record["nlpd"]),
                coverage95=float(record["coverage95"]),
                wall_seconds=float(record["wall_seconds"]),
                log_evidence=_optional_float(record["log_evidence"]),
                error=record["error"] or None,
            )
            for record in csv.DictReader(handle)
        ]


def load_predictions(path: Path | str) -> Mapping[str, np.ndarray]:
    """Columns of a prediction file as float arrays keyed by header name."""

    path = Path(path)
    with path.open("r", newline="", encoding="utf-8") as handle:
        records = list(csv.DictReader(handle))
    if not records:
        raise ValueError(f"{path} has no prediction rows")
    return {name: np.array([float(record[name]) for record in records]) for name in records[0]}


__all__ = [
    "PredictionTable",
    "ResultRow",
    "SummaryRow",
    "emit_report",
    "load_predictions",
    "load_results",
    "summarize",
    "write_predictions",
]
