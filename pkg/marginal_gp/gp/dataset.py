"""Training data container and the normalisation record used to report in original units."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateData

GRID_RTOL = 1e-6


def _readonly(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class NormRecord:
    """Affine maps between original and normalised units.

    ``x_norm = (x - input_offset) / input_scale`` and
    ``y_norm = (y - output_mean) / output_std``.
    """

    input_offset: np.ndarray
    input_scale: np.ndarray
    output_mean: float = 0.0
    output_std: float = 1.0

    def __post_init__(self) -> None:
        offset = _readonly(np.atleast_1d(self.input_offset))
        scale = _readonly(np.atleast_1d(self.input_scale))
        object.__setattr__(self, "input_offset", offset)
        object.__setattr__(self, "input_scale", scale)
        object.__setattr__(self, "output_mean", float(self.output_mean))
        object.__setattr__(self, "output_std", float(self.output_std))
        if offset.shape != scale.shape:
            raise ValueError("input_offset and input_scale must have the same length")
        if np.any(scale <= 0) or not self.output_std > 0:
            raise ValueError("input_scale and output_std must be strictly positive")

    @classmethod
    def identity(cls, dims: int) -> "NormRecord":
        return cls(input_offset=np.zeros(dims), input_scale=np.ones(dims))

    @property
    def dims(self) -> int:
        return int(self.input_offset.shape[0])

    def normalize_inputs(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.input_offset) / self.input_scale

    def denormalize_inputs(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=float) * self.input_scale + self.input_offset

    def normalize_targets(self, y: np.ndarray) -> np.ndarray:
        return (np.asarray(y, dtype=float) - self.output_mean) / self.output_std

    def denormalize_mean(self, mean: np.ndarray) -> np.ndarray:
        return np.asarray(mean, dtype=float) * self.output_std + self.output_mean

    def denormalize_variance(self, variance: np.ndarray) -> np.ndarray:
        return np.asarray(variance, dtype=float) * self.output_std**2


@dataclass(frozen=True, eq=False)
class Dataset:
    """Inputs (N x D), targets (N) and the record mapping them back to original units.

    ``fundamental_freq`` and ``nyquist_freq`` hold the per-dimension frequency
    bounds of the frequency prior once the set has been normalised; they are
    ``None`` for raw data.

    Failure Modes:
        - Empty data, mismatched lengths or non-finite values: ``ValueError``.
        - Norm record of a different input dimension: ``ValueError``.
    """

    inputs: np.ndarray
    targets: np.ndarray
    norm_record: NormRecord | None = None
    name: str = "dataset"
    fundamental_freq: np.ndarray | None = None
    nyquist_freq: np.ndarray | None = None

    def __post_init__(self) -> None:
        inputs = np.asarray(self.inputs, dtype=float)
        if inputs.ndim == 1:
            inputs = inputs[:, None]
        inputs = _readonly(inputs)
        targets = _readonly(np.asarray(self.targets, dtype=float).ravel())
        if inputs.ndim != 2 or inputs.shape[0] < 1 or inputs.shape[1] < 1:
            raise ValueError("inputs must be a non-empty N x D matrix")
        if targets.shape[0] != inputs.shape[0]:
            raise ValueError("inputs and targets must have the same number of rows")
        if not (np.all(np.isfinite(inputs)) and np.all(np.isfinite(targets))):
            raise ValueError("inputs and targets must be finite")
        record = self.norm_record or NormRecord.identity(inputs.shape[1])
        if record.dims != inputs.shape[1]:
            raise ValueError("norm_record dimension does not match the inputs")
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "norm_record", record)
        for label in ("fundamental_freq", "nyquist_freq"):
            value = getattr(self, label)
            if value is not None:
                object.__setattr__(self, label, _readonly(np.atleast_1d(value)))

    @property
    def n(self) -> int:
        return int(self.inputs.shape[0])

    @property
    def dims(self) -> int:
        return int(self.inputs.shape[1])

    def subset(self, index: np.ndarray, name: str | None = None) -> "Dataset":
        return Dataset(
            inputs=self.inputs[index],
            targets=self.targets[index],
            norm_record=self.norm_record,
            name=name or self.name,
            fundamental_freq=self.fundamental_freq,
            nyquist_freq=self.nyquist_freq,
        )


def nyquist_frequency(inputs: np.ndarray) -> np.ndarray:
    """Highest observable frequency per input dimension.

    Gridded dimensions give half the number of distinct locations per unit
    span (``N / 2`` on the unit interval); irregular ones give half the
    reciprocal of the median spacing between distinct locations.

    Failure Modes:
        - Fewer than two distinct locations in a dimension: ``DegenerateData``.
    """

    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim == 1:
        inputs = inputs[:, None]
    result = np.empty(inputs.shape[1])
    for d in range(inputs.shape[1]):
        locations = np.unique(inputs[:, d])
        if locations.shape[0] < 2:
            raise DegenerateData(f"input dimension {d} has fewer than two distinct values")
        spacings = np.diff(locations)
        if np.allclose(spacings, spacings[0], rtol=GRID_RTOL, atol=0.0):
            result[d] = 0.5 * locations.shape[0] / (locations[-1] - locations[0])
        else:
            result[d] = 0.5 / float(np.median(spacings))
    return result


__all__ = ["Dataset", "NormRecord", "nyquist_frequency"]
