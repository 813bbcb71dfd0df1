import csv
import math
from pathlib import Path

import numpy as np
import pytest

from marginal_gp.bench.report import (
    PREDICTIONS_DIR,
    SUMMARY_FILE,
    PredictionTable,
    ResultRow,
    emit_report,
    load_predictions,
    load_results,
    summarize,
)


def row(seed: int, nlpd: float, coverage95: float = 0.9, method: str = "ml2", **kwargs) -> ResultRow:
    return ResultRow(
        dataset="airline", method=method, seed=seed, nlpd=nlpd, coverage95=coverage95, wall_seconds=1.5, **kwargs
    )


def test_single_run_has_zero_standard_error() -> None:
    (summary,) = summarize([row(0, 1.2)])
    assert summary.n_runs == 1
    assert summary.nlpd_mean == pytest.approx(1.2)
    assert summary.nlpd_se == 0.0


def test_standard_error_over_seeds() -> None:
    values = [1.0, 2.0, 4.0]
    (summary,) = summarize([row(seed, value) for seed, value in enumerate(values)])
    assert summary.nlpd_mean == pytest.approx(np.mean(values))
    assert summary.nlpd_se == pytest.approx(np.std(values, ddof=1) / math.sqrt(3))


def test_failed_rows_are_left_out_of_the_summary() -> None:
    rows = [row(0, 1.0), row(1, math.nan, math.nan, error="AllRestartsFailed: boom"), row(2, 3.0)]
    (summary,) = summarize(rows)
    assert summary.n_runs == 2
    assert summary.nlpd_mean == pytest.approx(2.0)
    assert not rows[1].ok


def test_summary_groups_by_dataset_and_method() -> None:
    rows = [row(0, 1.0, method="nested", log_evidence=-3.0), row(0, 2.0), row(1, 2.2)]
    summary = summarize(rows)
    assert [(entry.method, entry.n_runs) for entry in summary] == [("ml2", 2), ("nested", 1)]


def test_report_round_trip(tmp_path: Path) -> None:
    rows = [
        row(0, 1.25, method="nested", log_evidence=-12.5),
        row(1, math.nan, math.nan, error="FactorizationFailure: singular"),
    ]
    written = emit_report(rows, tmp_path)
    assert set(written) == {"results", "summary", "timing"}
    loaded = load_results(written["results"])
    assert loaded[0] == rows[0]
    assert loaded[1].error == rows[1].error
    assert math.isnan(loaded[1].nlpd)
    assert loaded[1].log_evidence is None

    with (tmp_path / SUMMARY_FILE).open(encoding="utf-8") as handle:
        summary = list(csv.DictReader(handle))
    assert len(summary) == 1
    assert summary[0]["method"] == "nested"


def test_prediction_file_reproduces_the_score(tmp_path: Path) -> None:
    inputs = np.array([[1.0], [2.0], [3.0]])
    y_true = np.array([0.5, -0.2, 1.0])
    mean = np.array([0.4, 0.0, 0.8])
    pointwise = np.array([0.9, 1.1, 1.3])
    table = PredictionTable(
        dataset="airline",
        method="ml2",
        seed=0,
        inputs=inputs,
        y_true=y_true,
        mean=mean,
        lower=mean - 2.0,
        upper=mean + 2.0,
        nlpd=pointwise,
    )
    emit_report([row(0, float(np.mean(pointwise)))], tmp_path, predictions=[table])
    columns = load_predictions(tmp_path / PREDICTIONS_DIR / "airline__ml2__seed0.csv")
    assert list(columns) == ["x0", "y_true", "mean", "lower", "upper", "nlpd"]
    assert float(np.mean(columns["nlpd"])) == pytest.approx(load_results(tmp_path / "results.csv")[0].nlpd)
    assert np.array_equal(columns["y_true"], y_true)


def test_empty_report_is_rejected(tmp_path: Path) -> None:
    with pytest.raises(ValueError):
        emit_report([], tmp_path)


def test_negative_wall_time_is_rejected() -> None:
    with pytest.raises(ValueError):
        ResultRow(dataset="a", method="ml2", seed=0, nlpd=1.0, coverage95=1.0, wall_seconds=-1.0)
