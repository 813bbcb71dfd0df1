import math
from dataclasses import fields
from pathlib import Path
from typing import Any

import numpy as np
import pytest

from marginal_gp.bench.report import PREDICTIONS_DIR, ResultRow, emit_report, load_predictions, load_results
from marginal_gp.config import ExperimentConfig
from marginal_gp.workflows.experiment_runner import ExperimentRunner, run_experiment, thin

FAST_ML2 = {"n_restarts": 2, "max_iters": 60}


def write_series(path: Path, n: int = 14) -> Path:
    x = np.arange(n, dtype=float)
    y = 3.0 + np.sin(2 * math.pi * x / 6.0) + 0.05 * x
    lines = ["x,y"] + [f"{xi},{yi}" for xi, yi in zip(x, y)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def make_config(tmp_path: Path, **payload: Any) -> ExperimentConfig:
    base: dict[str, Any] = {
        "q_components": 1,
        "seeds": [0],
        "mixture_components": 20,
        "quantile_draws": 500,
        "output_dir": str(tmp_path / "out"),
        "ml2": FAST_ML2,
        "synthetic": {"n_train": 8, "n_test": 12},
    }
    base.update(payload)
    return ExperimentConfig.from_dict(base)


def test_ml2_on_a_time_series(tmp_path: Path) -> None:
    series = write_series(tmp_path / "toy.csv")
    runner = ExperimentRunner(make_config(tmp_path, task="timeseries", data_paths=[str(series)]), workers=1)
    outcome = runner.run()
    (row,) = outcome.rows
    assert row.ok
    assert row.dataset == "toy"
    assert math.isfinite(row.nlpd)
    assert 0.0 <= row.coverage95 <= 1.0
    assert row.log_evidence is None
    (table,) = outcome.predictions
    # chronological split: 60% of 14 points train
    assert table.y_true.shape == (5,)
    assert float(np.mean(table.nlpd)) == pytest.approx(row.nlpd)


def test_split_statistics_come_from_training_data(tmp_path: Path) -> None:
    series = write_series(tmp_path / "toy.csv")
    runner = ExperimentRunner(make_config(tmp_path, task="timeseries", data_paths=[str(series)]), workers=1)
    task = runner.prepare(str(series), seed=0)
    record = task.train.norm_record
    raw_train = record.denormalize_mean(task.train.targets)
    assert record.output_mean == pytest.approx(float(np.mean(raw_train)))
    assert task.test.norm_record is record
    assert np.all(task.test.inputs > 1.0)
    assert np.allclose(record.denormalize_mean(task.test.targets), task.test_raw.targets)


def test_nested_rows_carry_the_log_evidence(tmp_path: Path) -> None:
    cfg = make_config(tmp_path, methods=["nested"], nested={"live_points": 15, "write_trace": True})
    (row,) = run_experiment(cfg)
    assert row.ok
    assert row.log_evidence is not None and math.isfinite(row.log_evidence)
    assert (tmp_path / "out" / "traces" / "synthetic-default__nested__seed0.csv").exists()


def test_hmc_cell(tmp_path: Path) -> None:
    cfg = make_config(tmp_path, methods=["hmc"], hmc={"n_warmup": 20, "n_samples": 20, "path_length": 5})
    (row,) = ExperimentRunner(cfg, workers=1).run().rows
    assert row.ok
    assert row.method == "hmc"


def test_one_row_per_seed_in_sorted_order(tmp_path: Path) -> None:
    rows = ExperimentRunner(make_config(tmp_path, seeds=[2, 0, 1]), workers=1).run().rows
    assert [row.seed for row in rows] == [0, 1, 2]
    assert len({row.nlpd for row in rows}) == 3


def test_identical_configs_give_identical_scores(tmp_path: Path) -> None:
    cfg = make_config(tmp_path)
    first = ExperimentRunner(cfg, workers=1).run().rows
    second = ExperimentRunner(cfg, workers=2).run().rows
    assert [row.nlpd for row in first] == [row.nlpd for row in second]
    assert [row.coverage95 for row in first] == [row.coverage95 for row in second]


def test_failures_are_recorded_not_raised(tmp_path: Path) -> None:
    cfg = make_config(tmp_path, task="timeseries", data_paths=[str(tmp_path / "missing.csv")])
    (row,) = ExperimentRunner(cfg, workers=1).run().rows
    assert not row.ok
    assert row.dataset == "missing"
    assert row.error.startswith("FileNotFoundError")
    assert math.isnan(row.nlpd)


def test_pattern_task_runs_in_two_dimensions(tmp_path: Path) -> None:
    cfg = make_config(tmp_path, task="pattern2d", pattern2d={"n_train": 20, "grid": 4})
    outcome = ExperimentRunner(cfg, workers=1).run()
    (row,) = outcome.rows
    assert row.ok
    assert outcome.predictions[0].inputs.shape == (16, 2)


def test_thinning_keeps_at_most_the_requested_count() -> None:
    samples = list(range(1000))
    assert len(thin(samples, 200)) == 200
    assert len(thin(samples, 300)) <= 300
    assert thin(samples[:5], 200) == samples[:5]


def test_every_method_reports_finite_scores_end_to_end(tmp_path: Path) -> None:
    cfg = make_config(
        tmp_path,
        methods=["ml2", "hmc", "nested"],
        hmc={"n_warmup": 20, "n_samples": 20, "path_length": 5},
        nested={"live_points": 15},
    )
    outcome = ExperimentRunner(cfg, workers=1).run()
    written = emit_report(outcome.rows, cfg.output_dir, outcome.predictions)
    assert {path.name for path in written.values()} == {"results.csv", "summary.csv", "timing.csv"}

    with written["results"].open(encoding="utf-8") as handle:
        header = handle.readline().strip().split(",")
    assert header == [field.name for field in fields(ResultRow)]
    rows = load_results(written["results"])
    assert sorted(row.method for row in rows) == ["hmc", "ml2", "nested"]
    for row in rows:
        assert row.ok, row.error
        assert math.isfinite(row.nlpd) and math.isfinite(row.wall_seconds)
        assert 0.0 <= row.coverage95 <= 1.0
        assert (row.log_evidence is not None) == (row.method == "nested")

    prediction_files = sorted((cfg.output_dir / PREDICTIONS_DIR).glob("*.csv"))
    assert len(prediction_files) == 3
    for path in prediction_files:
        columns = load_predictions(path)
        assert list(columns) == ["x0", "y_true", "mean", "lower", "upper", "nlpd"]
        assert all(np.all(np.isfinite(values)) for values in columns.values())
        assert np.all(columns["lower"] <= columns["upper"])
        assert columns["y_true"].shape == (12,)


def test_sparse_series_fails_the_sampling_cells_as_degenerate(tmp_path: Path) -> None:
    series = write_series(tmp_path / "tiny.csv", n=3)
    cfg = make_config(
        tmp_path,
        task="timeseries",
        data_paths=[str(series)],
        methods=["ml2", "hmc", "nested"],
        hmc={"n_warmup": 5, "n_samples": 5, "path_length": 3},
        nested={"live_points": 10},
    )
    rows = {row.method: row for row in ExperimentRunner(cfg, workers=1).run().rows}
    assert rows["ml2"].ok
    for method in ("hmc", "nested"):
        assert not rows[method].ok
        assert rows[method].error.startswith("DegenerateData")
        assert "Nyquist" in rows[method].error


def test_series_sharing_a_file_name_keep_separate_outputs(tmp_path: Path) -> None:
    for region in ("north", "south"):
        (tmp_path / region).mkdir()
    first = write_series(tmp_path / "north" / "toy.csv")
    second = write_series(tmp_path / "south" / "toy.csv", n=16)
    cfg = make_config(tmp_path, task="timeseries", data_paths=[str(first), str(second)])
    outcome = ExperimentRunner(cfg, workers=1).run()
    assert sorted(row.dataset for row in outcome.rows) == ["north-toy", "south-toy"]
    emit_report(outcome.rows, cfg.output_dir, outcome.predictions)
    names = sorted(path.name for path in (cfg.output_dir / PREDICTIONS_DIR).glob("*.csv"))
    assert names == ["north-toy__ml2__seed0.csv", "south-toy__ml2__seed0.csv"]


def test_labels_fall_back_to_a_path_digest(tmp_path: Path) -> None:
    paths = [tmp_path / "one" / "data" / "toy.csv", tmp_path / "two" / "data" / "toy.csv", tmp_path / "air.csv"]
    cfg = make_config(tmp_path, task="timeseries", data_paths=[str(path) for path in paths])
    labels = ExperimentRunner(cfg, workers=1).dataset_labels()
    assert labels[str(paths[2])] == "air"
    first, second = labels[str(paths[0])], labels[str(paths[1])]
    assert first != second
    assert first.startswith("data-toy-") and second.startswith("data-toy-")
