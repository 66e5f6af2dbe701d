"""Univariate series container, train/validation/test splitting, min-max
scaling, lag-window datasets and additive seasonal decomposition."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .errors import DegenerateRange, LagTooLarge, SeriesTooShort


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"series values must be one-dimensional, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


def month_label(start: str, offset: int) -> str:
    """Label ``offset`` months after a ``YYYY-MM`` label."""
    year, month = (int(p) for p in start.split("-"))
    idx = year * 12 + (month - 1) + offset
    return f"{idx // 12:04d}-{idx % 12 + 1:02d}"


@dataclass(frozen=True)
class Series:
    values: np.ndarray
    period: int = 12
    start_label: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))
        if self.period < 1:
            raise ValueError("period must be a positive integer")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("series values must be finite")

    def __len__(self):
        return len(self.values)

    def slice(self, start: int, stop: int) -> "Series":
        label = None
        if self.start_label is not None:
            label = month_label(self.start_label, start)
        return Series(self.values[start:stop], self.period, label)

    def labels(self) -> list[str]:
        if self.start_label is None:
            return [str(i) for i in range(len(self))]
        return [month_label(self.start_label, i) for i in range(len(self))]


ArrayOrSeries = Union[Series, Sequence[float], np.ndarray]


def _values(x: ArrayOrSeries) -> np.ndarray:
    return x.values if isinstance(x, Series) else np.asarray(x, dtype=np.float64)


def _like(template: ArrayOrSeries, values: np.ndarray):
    if isinstance(template, Series):
        return Series(values, template.period, template.start_label)
    return values


@dataclass(frozen=True)
class SplitSpec:
    validation_len: int = 60
    test_len: int = 60

    def __post_init__(self):
        if self.validation_len < 1 or self.test_len < 1:
            raise ValueError("validation and test lengths must be positive")


class NormSource(str, enum.Enum):
    TRAIN_ONLY = "TrainOnly"
    TRAIN_PLUS_VALIDATION = "TrainPlusValidation"


@dataclass(frozen=True)
class NormStats:
    min: float
    max: float
    source: NormSource = NormSource.TRAIN_ONLY

    def __post_init__(self):
        if not self.max > self.min:
            raise DegenerateRange(f"max ({self.max}) must exceed min ({self.min})")

    @classmethod
    def from_values(cls, values: ArrayOrSeries, source=NormSource.TRAIN_ONLY) -> "NormStats":
        v = _values(values)
        return cls(float(v.min()), float(v.max()), NormSource(source))


@dataclass(frozen=True)
class SplitSeries:
    train: Series
    validation: Series
    test: Series
    norm: NormStats

    def train_validation(self) -> Series:
        return Series(
            np.concatenate([self.train.values, self.validation.values]),
            self.train.period,
            self.train.start_label,
        )


def split(series: Series, spec: SplitSpec) -> SplitSeries:
    """Cut ``series`` into contiguous train / validation / test slices.

    Normalization statistics are taken from the training slice only.
    """
    n = len(series)
    if n <= spec.validation_len + spec.test_len:
        raise SeriesTooShort(
            f"series of length {n} cannot hold validation={spec.validation_len} "
            f"and test={spec.test_len} plus a training slice"
        )
    n_train = n - spec.validation_len - spec.test_len
    train = series.slice(0, n_train)
    validation = series.slice(n_train, n_train + spec.validation_len)
    test = series.slice(n_train + spec.validation_len, n)
    return SplitSeries(train, validation, test, NormStats.from_values(train))


def normalize(values: ArrayOrSeries, stats: NormStats):
    """Min-max scale with the given statistics. Out-of-range values are not clipped."""
    if not stats.max > stats.min:
        raise DegenerateRange("max must exceed min")
    z = (_values(values) - stats.min) / (stats.max - stats.min)
    return _like(values, z)


def denormalize(values: ArrayOrSeries, stats: NormStats):
    if not stats.max > stats.min:
        raise DegenerateRange("max must exceed min")
    y = _values(values) * (stats.max - stats.min) + stats.min
    return _like(values, y)


@dataclass(frozen=True)
class LagDataset:
    inputs: np.ndarray  # (n_samples, m)
    targets: np.ndarray  # (n_samples,)
    m: int

    def __len__(self):
        return len(self.targets)


def make_lag_dataset(series: ArrayOrSeries, m: int) -> LagDataset:
    """Stride-1 sliding windows: row i is ``z[i:i+m]`` and its target ``z[i+m]``."""
    z = _values(series)
    m = int(m)
    if m < 1:
        raise ValueError("lag count must be at least 1")
    if m >= len(z):
        raise LagTooLarge(f"lag {m} needs a series longer than {m}, got {len(z)}")
    windows = np.lib.stride_tricks.sliding_window_view(z, m)[:-1]
    return LagDataset(np.ascontiguousarray(windows), z[m:].copy(), m)


@dataclass(frozen=True)
class Decomposition:
    seasonal: np.ndarray
    trend_plus_remainder: Series

    @property
    def period(self) -> int:
        return len(self.seasonal)


def _centered_moving_average(y: np.ndarray, period: int) -> np.ndarray:
    """Centered MA of order ``period`` (2 x period for even periods); NaN at the ends."""
    n = len(y)
    out = np.full(n, np.nan)
    if period % 2:
        half = period // 2
        weights = np.full(period, 1.0 / period)
    else:
        half = period // 2
        weights = np.full(period + 1, 1.0 / period)
        weights[0] = weights[-1] = 0.5 / period
    out[half:n - half] = np.convolve(y, weights, mode="valid")
    return out


def decompose(series: Series) -> Decomposition:
    """Classical additive decomposition with seasonal indices summing to zero."""
    p = series.period
    y = series.values
    if len(y) < 2 * p:
        raise SeriesTooShort(f"need at least {2 * p} points to decompose, got {len(y)}")
    detrended = y - _centered_moving_average(y, p)
    phase = np.arange(len(y)) % p
    seasonal = np.array([np.nanmean(detrended[phase == j]) for j in range(p)])
    seasonal -= seasonal.mean()
    seasonal.setflags(write=False)
    deseasonalized = y - seasonal[phase]
    return Decomposition(seasonal, Series(deseasonalized, p, series.start_label))


def reseasonalize(deseasonalized: ArrayOrSeries, decomposition: Decomposition, phase: int = 0):
    """Add seasonal index ``(phase + t) mod period`` back onto point ``t``."""
    d = _values(deseasonalized)
    idx = (int(phase) + np.arange(len(d))) % decomposition.period
    return _like(deseasonalized, d + decomposition.seasonal[idx])
