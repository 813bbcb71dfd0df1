"""Benchmark data: series ingestion, normalisation, splits and generated tasks."""
from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from ..errors import DegenerateData, DuplicateInput, ParseError
from ..gp.dataset import Dataset, NormRecord, nyquist_frequency
from ..gp.regression import jittered_cholesky
from ..kernels.spectral_mixture import SmHyperParams, gram_matrix

SERIES_HEADER = ("x", "y")

# weights, frequencies, bandwidths of the two-component generating kernels
SYNTHETIC_PRESETS: dict[str, tuple[tuple[float, ...], tuple[float, ...], tuple[float, ...]]] = {
    "default": ((0.5, 0.5), (2.0, 5.0), (0.3, 0.3)),
    "recovery": ((0.05, 0.05), (3.14, 12.56), (1.27, 0.32)),
}


def load_series(path: Path | str) -> Dataset:
    """Read a two-column ``x,y`` CSV series, sorted by ``x``.

    Failure Modes:
        - Missing or wrong header, wrong cell count, non-numeric or non-finite
          cell, or no data rows: ``ParseError`` naming the line.
        - Two rows with the same ``x``: ``DuplicateInput``.
        - Missing file: propagates ``FileNotFoundError``.
    """

    path = Path(path)
    xs: list[float] = []
    ys: list[float] = []
    with path.open("r", newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or tuple(cell.strip().lower() for cell in header) != SERIES_HEADER:
            raise ParseError(str(path), 1, "expected the header 'x,y'")
        for row in reader:
            line = reader.line_num
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 2:
                raise ParseError(str(path), line, f"expected 2 cells, got {len(row)}")
            try:
                x, y = float(row[0]), float(row[1])
            except ValueError:
                raise ParseError(str(path), line, f"non-numeric cell in {row!r}") from None
            if not (math.isfinite(x) and math.isfinite(y)):
                raise ParseError(str(path), line, "non-finite value")
            xs.append(x)
            ys.append(y)
    if not xs:
        raise ParseError(str(path), 2, "no data rows")

    inputs = np.asarray(xs)
    targets = np.asarray(ys)
    order = np.argsort(inputs, kind="stable")
    inputs, targets = inputs[order], targets[order]
    repeated = np.flatnonzero(np.diff(inputs) == 0)
    if repeated.size:
        raise DuplicateInput(f"{path}: duplicate input x={inputs[repeated[0]]!r}")
    return Dataset(inputs=inputs, targets=targets, name=path.stem)


def normalize(data: Dataset) -> Dataset:
    """Map inputs to [0, 1] per dimension and standardise targets.

    The returned set carries its normalisation record, ``f_fun = 1`` and the
    Nyquist frequency of the normalised inputs.

    Failure Modes:
        - Fewer than two points, a constant input dimension or constant
          targets: ``DegenerateData``.
    """

    if data.n < 2:
        raise DegenerateData("at least two points are needed to normalise")
    low = np.min(data.inputs, axis=0)
    span = np.max(data.inputs, axis=0) - low
    if np.any(span <= 0):
        raise DegenerateData("an input dimension is constant")
    output_mean = float(np.mean(data.targets))
    output_std = float(np.std(data.targets))
    if not output_std > 0:
        raise DegenerateData("targets are constant")
    record = NormRecord(input_offset=low, input_scale=span, output_mean=output_mean, output_std=output_std)
    inputs = record.normalize_inputs(data.inputs)
    return Dataset(
        inputs=inputs,
        targets=record.normalize_targets(data.targets),
        norm_record=record,
        name=data.name,
        fundamental_freq=np.ones(data.dims),
        nyquist_freq=nyquist_frequency(inputs),
    )


def apply_normalization(data: Dataset, reference: Dataset) -> Dataset:
    """Express ``data`` in the normalised units of ``reference``."""

    record = reference.norm_record
    return Dataset(
        inputs=record.normalize_inputs(data.inputs),
        targets=record.normalize_targets(data.targets),
        norm_record=record,
        name=data.name,
        fundamental_freq=reference.fundamental_freq,
        nyquist_freq=reference.nyquist_freq,
    )


def _split_count(n: int, frac: float) -> int:
    if not 0 < frac < 1:
        raise ValueError("split fraction must be between 0 and 1")
    if n < 2:
        raise DegenerateData("at least two points are needed to split")
    return min(max(math.ceil(frac * n), 1), n - 1)


def chrono_split(data: Dataset, frac: float) -> tuple[Dataset, Dataset]:
    """First ``ceil(frac * N)`` points in input order train, the rest test.

    The training count is clamped to ``[1, N - 1]`` so both sides are non-empty.
    """

    n_train = _split_count(data.n, frac)
    order = np.argsort(data.inputs[:, 0], kind="stable")
    return (
        data.subset(order[:n_train], name=data.name),
        data.subset(order[n_train:], name=data.name),
    )


def random_split(data: Dataset, n_train: int, rng: np.random.Generator) -> tuple[Dataset, Dataset]:
    """Random interleaved split with ``n_train`` training points."""

    if not 1 <= n_train < data.n:
        raise ValueError(f"n_train must be in [1, {data.n - 1}]")
    permutation = rng.permutation(data.n)
    return (
        data.subset(np.sort(permutation[:n_train]), name=data.name),
        data.subset(np.sort(permutation[n_train:]), name=data.name),
    )


def preset_params(preset: str, noise_sd: float) -> SmHyperParams:
    """Generating kernel of a named synthetic preset."""

    try:
        weights, freqs, bandwidths = SYNTHETIC_PRESETS[preset]
    except KeyError:
        raise ValueError(f"unknown synthetic preset {preset!r}, expected one of {sorted(SYNTHETIC_PRESETS)}") from None
    noise_variance = max(noise_sd**2, np.finfo(float).tiny)
    return SmHyperParams.from_arrays(weights, freqs, bandwidths, noise_variance)


def synth_generate(
    true_params: SmHyperParams,
    n: int,
    noise_sd: float,
    domain: tuple[float, float],
    rng: np.random.Generator,
    name: str = "synthetic",
) -> tuple[Dataset, np.ndarray]:
    """Draw ``n`` noisy observations of a latent GP sample on ``domain``.

    Failure Modes:
        - ``n < 2`` or a negative ``noise_sd``: ``ValueError``.
        - Pathological ``true_params``: ``FactorizationFailure``.
    """

    if n < 2:
        raise ValueError("n must be at least 2")
    if noise_sd < 0:
        raise ValueError("noise_sd must be non-negative")
    low, high = domain
    inputs = np.sort(rng.uniform(low, high, size=n))[:, None]
    factor = jittered_cholesky(gram_matrix(inputs, true_params))
    latent = factor @ rng.standard_normal(n)
    targets = latent + noise_sd * rng.standard_normal(n)
    return Dataset(inputs=inputs, targets=targets, name=name), latent


def pattern2d_function(inputs: np.ndarray) -> np.ndarray:
    """``cos(2 x1) cos(2 x2) sqrt(|x1 x2|)``."""

    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    x1, x2 = inputs[:, 0], inputs[:, 1]
    return np.cos(2.0 * x1) * np.cos(2.0 * x2) * np.sqrt(np.abs(x1 * x2))


def pattern2d_generate(
    n_train: int,
    grid: int,
    rng: np.random.Generator,
    extent: float = 6.0,
) -> tuple[Dataset, Dataset]:
    """Noiseless 2-D pattern: uniform training inputs, regular ``grid x grid`` test inputs."""

    if n_train < 1 or grid < 1:
        raise ValueError("n_train and grid must be at least 1")
    train_inputs = rng.uniform(-extent, extent, size=(n_train, 2))
    axis = np.linspace(-extent, extent, grid)
    first, second = np.meshgrid(axis, axis, indexing="ij")
    test_inputs = np.column_stack([first.ravel(), second.ravel()])
    return (
        Dataset(inputs=train_inputs, targets=pattern2d_function(train_inputs), name="pattern2d"),
        Dataset(inputs=test_inputs, targets=pattern2d_function(test_inputs), name="pattern2d"),
    )


__all__ = [
    "SYNTHETIC_PRESETS",
    "apply_normalization",
    "chrono_split",
    "load_series",
    "normalize",
    "nyquist_frequency",
    "pattern2d_function",
    "pattern2d_generate",
    "preset_params",
    "random_split",
    "synth_generate",
]
