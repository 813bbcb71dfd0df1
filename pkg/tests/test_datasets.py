from pathlib import Path

import numpy as np
import pytest

from marginal_gp.bench.datasets import (
    apply_normalization,
    chrono_split,
    load_series,
    normalize,
    pattern2d_function,
    pattern2d_generate,
    preset_params,
    random_split,
    synth_generate,
)
from marginal_gp.errors import DegenerateData, DuplicateInput, ParseError
from marginal_gp.gp.dataset import Dataset, nyquist_frequency


def write_series(tmp_path: Path, text: str, name: str = "airline.csv") -> Path:
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_series_is_loaded_sorted(tmp_path: Path) -> None:
    path = write_series(tmp_path, "x,y\n3,30\n1,10\n\n2,20\n")
    data = load_series(path)
    assert data.name == "airline"
    assert np.array_equal(data.inputs[:, 0], [1.0, 2.0, 3.0])
    assert np.array_equal(data.targets, [10.0, 20.0, 30.0])


@pytest.mark.parametrize(
    "text, line",
    [
        ("time,value\n1,2\n", 1),
        ("x,y\n1,2\n2,abc\n", 3),
        ("x,y\n1,2,3\n", 2),
        ("x,y\n1,inf\n", 2),
        ("x,y\n", 2),
    ],
)
def test_malformed_series_name_the_line(tmp_path: Path, text: str, line: int) -> None:
    with pytest.raises(ParseError) as info:
        load_series(write_series(tmp_path, text))
    assert info.value.line == line


def test_repeated_inputs_are_rejected(tmp_path: Path) -> None:
    with pytest.raises(DuplicateInput):
        load_series(write_series(tmp_path, "x,y\n1,2\n2,3\n1,4\n"))


def test_missing_series_file(tmp_path: Path) -> None:
    with pytest.raises(FileNotFoundError):
        load_series(tmp_path / "absent.csv")


def test_normalisation_maps_inputs_to_unit_interval() -> None:
    data = normalize(Dataset(inputs=[10.0, 20.0, 30.0], targets=[1.0, 2.0, 6.0]))
    assert np.allclose(data.inputs[:, 0], [0.0, 0.5, 1.0])
    assert np.mean(data.targets) == pytest.approx(0.0, abs=1e-12)
    assert np.std(data.targets) == pytest.approx(1.0)
    assert np.array_equal(data.fundamental_freq, [1.0])
    assert np.allclose(data.norm_record.denormalize_mean(data.targets), [1.0, 2.0, 6.0])


def test_test_split_uses_the_training_normalisation() -> None:
    train = normalize(Dataset(inputs=[0.0, 1.0, 2.0], targets=[0.0, 1.0, 2.0]))
    test = apply_normalization(Dataset(inputs=[4.0], targets=[5.0]), train)
    assert test.inputs[0, 0] == pytest.approx(2.0)
    assert test.norm_record is train.norm_record
    assert np.array_equal(test.nyquist_freq, train.nyquist_freq)


def test_gridded_nyquist_is_half_the_point_count() -> None:
    data = normalize(Dataset(inputs=np.arange(100.0), targets=np.sin(np.arange(100.0))))
    assert data.nyquist_freq[0] == pytest.approx(50.0)


def test_irregular_nyquist_uses_median_spacing() -> None:
    assert nyquist_frequency([0.0, 0.1, 0.2, 0.3, 0.7, 1.0])[0] == pytest.approx(5.0)


@pytest.mark.parametrize(
    "inputs, targets",
    [([1.0, 1.0, 1.0], [1.0, 2.0, 3.0]), ([1.0, 2.0, 3.0], [4.0, 4.0, 4.0]), ([1.0], [2.0])],
)
def test_degenerate_sets_cannot_be_normalised(inputs: list[float], targets: list[float]) -> None:
    with pytest.raises(DegenerateData):
        normalize(Dataset(inputs=inputs, targets=targets))


def test_chronological_split_counts() -> None:
    data = Dataset(inputs=np.arange(10.0)[::-1], targets=np.arange(10.0))
    train, test = chrono_split(data, 0.6)
    assert (train.n, test.n) == (6, 4)
    assert train.inputs.max() < test.inputs.min()
    train, test = chrono_split(data, 0.99)
    assert (train.n, test.n) == (9, 1)
    with pytest.raises(ValueError):
        chrono_split(data, 1.0)


def test_random_split_partitions_the_points() -> None:
    data = Dataset(inputs=np.arange(20.0), targets=np.arange(20.0))
    train, test = random_split(data, 7, np.random.default_rng(0))
    assert (train.n, test.n) == (7, 13)
    combined = np.sort(np.concatenate([train.inputs[:, 0], test.inputs[:, 0]]))
    assert np.array_equal(combined, np.arange(20.0))
    with pytest.raises(ValueError):
        random_split(data, 20, np.random.default_rng(0))


def test_noiseless_synthetic_targets_equal_the_latent() -> None:
    data, latent = synth_generate(preset_params("default", 0.0), 30, 0.0, (-1.0, 1.0), np.random.default_rng(0))
    assert np.array_equal(data.targets, latent)
    assert np.all(np.diff(data.inputs[:, 0]) > 0)
    assert np.all((data.inputs >= -1.0) & (data.inputs <= 1.0))


def test_synthetic_generation_is_seeded() -> None:
    params = preset_params("recovery", 0.1)
    first, _ = synth_generate(params, 15, 0.1, (-1.0, 1.0), np.random.default_rng(3))
    second, _ = synth_generate(params, 15, 0.1, (-1.0, 1.0), np.random.default_rng(3))
    assert np.array_equal(first.targets, second.targets)
    with pytest.raises(ValueError):
        preset_params("unknown", 0.1)


def test_pattern_values() -> None:
    assert pattern2d_function([[0.0, 0.0]])[0] == pytest.approx(0.0)
    assert pattern2d_function([[1.0, 1.0]])[0] == pytest.approx(np.cos(2.0) ** 2)
    assert pattern2d_function([[np.pi, 1 / np.pi]])[0] == pytest.approx(np.cos(2 / np.pi))


def test_pattern_task_sizes() -> None:
    train, test = pattern2d_generate(50, 20, np.random.default_rng(0))
    assert (train.n, train.dims) == (50, 2)
    assert (test.n, test.dims) == (400, 2)
    assert np.all(np.abs(train.inputs) <= 6.0)
    assert np.allclose(test.targets, pattern2d_function(test.inputs))
