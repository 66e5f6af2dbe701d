"""End-to-end forecasting runs.

LSTM variants: deseasonalize train+validation, scale with training
statistics, let Bayesian optimization choose the lag and network
hyperparameters by validation MSE (or only the network hyperparameters for
the fixed-lag variants), retrain on train+validation, forecast the test
horizon recursively and undo the scaling and deseasonalization.

Seeds: every random draw derives from ``numpy.random.SeedSequence`` with
entropy ``[master_seed, crc32(station), variant_code, purpose, iteration]``
where purpose is 0 for the BO driver, 1 for the objective evaluation of a
BO iteration and 2 for the final retrain.
"""

from __future__ import annotations

import enum
import logging
import math
import time
import zlib
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import baselines
from .bayesopt import BOTrace, SearchSpace, bo_optimize, default_space
from .errors import ForecastError, NonFiniteLoss, PipelineFailed, SeriesTooShort
from .gp import KernelKind
from .lstm import LSTMConfig, predict_recursive, train
from .series import (
    NormSource, NormStats, Series, SplitSeries, SplitSpec, decompose, denormalize,
    make_lag_dataset, normalize, reseasonalize, split,
)

log = logging.getLogger(__name__)


class Variant(str, enum.Enum):
    PROP = "PROP"
    LSL = "LSL"
    LFH1 = "LFH1"
    LFH1P25 = "LFH1p25"
    SEASONAL_NAIVE = "seasonal-naive"
    HOLT_WINTERS = "holt-winters"

    @property
    def is_lstm(self) -> bool:
        return self in (Variant.PROP, Variant.LSL, Variant.LFH1, Variant.LFH1P25)


_VARIANT_CODE = {v: i for i, v in enumerate(Variant)}


def lag_for_variant(variant, period: int, horizon: int) -> Optional[int]:
    """Pinned lag of a fixed-lag variant; ``None`` means the lag is searched."""
    variant = Variant(variant)
    if period < 1 or horizon < 1:
        raise ValueError("period and horizon must be positive")
    if variant is Variant.LSL:
        return period
    if variant is Variant.LFH1:
        return horizon
    if variant is Variant.LFH1P25:
        return int(math.floor(period * 1.25 + 0.5))
    if variant is Variant.PROP:
        return None
    raise ValueError(f"{variant.value} has no lag")


def derive_seed(master: int, station: str, variant, purpose: int, iteration: int = 0) -> int:
    ss = np.random.SeedSequence([int(master), zlib.crc32(station.encode()),
                                 _VARIANT_CODE[Variant(variant)], purpose, iteration])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class HyperParams:
    m: int
    dr: float
    lr: float
    hu1: int
    hu2: int
    b: int

    @classmethod
    def from_dict(cls, d: dict, m: Optional[int] = None) -> "HyperParams":
        return cls(int(d["m"] if m is None else m), float(d["dr"]), float(d["lr"]),
                   int(d["hu1"]), int(d["hu2"]), int(d["b"]))

    def as_dict(self) -> dict:
        return {"m": self.m, "dr": self.dr, "lr": self.lr,
                "hu1": self.hu1, "hu2": self.hu2, "b": self.b}

    def lstm_config(self, epochs: int, patience: int, seed: int) -> LSTMConfig:
        return LSTMConfig(self.m, self.hu1, self.hu2, self.dr, self.lr, self.b,
                          epochs, seed, patience)


@dataclass(frozen=True)
class PipelineConfig:
    split: SplitSpec = field(default_factory=SplitSpec)
    space: SearchSpace = field(default_factory=default_space)
    n_initial: int = 10
    n_iterations: int = 40
    epochs: int = 150
    patience: int = 20
    seed: int = 0
    variant: Variant = Variant.PROP
    deseasonalize: bool = True
    kernel: KernelKind = KernelKind.MATERN52

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))


@dataclass
class ForecastResult:
    station: str
    variant: Variant
    forecasts: np.ndarray
    actual: np.ndarray
    params: Optional[HyperParams] = None
    validation_objective: Optional[float] = None
    trace: Optional[BOTrace] = None
    seconds: float = 0.0


def validation_score(forecast_z, validation_z) -> float:
    """Negative mean squared error on the scaled validation slice."""
    f = np.asarray(forecast_z, dtype=float)
    v = np.asarray(validation_z, dtype=float)
    if not np.all(np.isfinite(f)):
        return -math.inf
    return -float(np.mean((v - f) ** 2))


def objective_eval(candidate: HyperParams, data: SplitSeries, epochs: int = 150,
                   patience: int = 20, seed: int = 0) -> float:
    """Train on the scaled training slice and score |V| recursive forecasts.

    Training failures score -inf.
    """
    z_train = normalize(data.train.values, data.norm)
    z_val = normalize(data.validation.values, data.norm)
    if candidate.m >= len(z_train):
        return -math.inf
    dataset = make_lag_dataset(z_train, candidate.m)
    try:
        model, _ = train(candidate.lstm_config(epochs, patience, seed), dataset)
        forecast = predict_recursive(model, z_train, len(z_val))
    except NonFiniteLoss as exc:
        log.info("candidate %s failed: %s", candidate, exc)
        return -math.inf
    return validation_score(forecast, z_val)


@dataclass(frozen=True)
class _Prepared:
    train_validation: Series  # possibly deseasonalized
    test: Series
    data: SplitSeries
    decomposition: object


def _prepare(series: Series, config: PipelineConfig) -> _Prepared:
    spec = config.split
    if len(series) <= spec.validation_len + spec.test_len:
        raise SeriesTooShort(
            f"series of length {len(series)} cannot hold validation={spec.validation_len} "
            f"and test={spec.test_len}"
        )
    n_tv = len(series) - spec.test_len
    tv = series.slice(0, n_tv)
    test = series.slice(n_tv, len(series))
    decomposition = None
    if config.deseasonalize:
        decomposition = decompose(tv)
        tv = decomposition.trend_plus_remainder
    # the test slice is carried along untouched; only train/validation are modeled
    joined = Series(np.concatenate([tv.values, test.values]), series.period, series.start_label)
    return _Prepared(tv, test, split(joined, spec), decomposition)


def _final_forecast(prep: _Prepared, hp: HyperParams, config: PipelineConfig, seed: int) -> np.ndarray:
    tv = prep.train_validation
    stats = NormStats.from_values(tv, NormSource.TRAIN_PLUS_VALIDATION)
    z_tv = normalize(tv.values, stats)
    dataset = make_lag_dataset(z_tv, hp.m)
    try:
        model, _ = train(hp.lstm_config(config.epochs, config.patience, seed), dataset)
    except NonFiniteLoss as exc:
        raise PipelineFailed(f"final retrain with {hp} diverged: {exc}") from exc
    z_hat = predict_recursive(model, z_tv, len(prep.test))
    y_hat = denormalize(z_hat, stats)
    if prep.decomposition is not None:
        y_hat = reseasonalize(y_hat, prep.decomposition, phase=len(tv))
    if not np.all(np.isfinite(y_hat)):
        raise PipelineFailed("final forecasts are not finite")
    return y_hat


def _run_lstm(series: Series, config: PipelineConfig, station: str, pinned_m: Optional[int]) -> ForecastResult:
    start = time.perf_counter()
    variant = config.variant
    prep = _prepare(series, config)
    space = config.space if pinned_m is None else config.space.without("m")

    def objective(params, iteration):
        hp = HyperParams.from_dict(params, m=pinned_m)
        seed = derive_seed(config.seed, station, variant, 1, iteration)
        return objective_eval(hp, prep.data, config.epochs, config.patience, seed)

    best, trace = bo_optimize(objective, space, config.n_initial, config.n_iterations,
                              rng=derive_seed(config.seed, station, variant, 0),
                              kernel_kind=config.kernel)
    best_value = trace.best().value
    if not math.isfinite(best_value):
        raise PipelineFailed(f"{station}/{variant.value}: every BO evaluation failed")
    hp = HyperParams.from_dict(best, m=pinned_m)
    y_hat = _final_forecast(prep, hp, config, derive_seed(config.seed, station, variant, 2))
    return ForecastResult(station, variant, y_hat, prep.test.values.copy(), hp, best_value,
                          trace, time.perf_counter() - start)


def run_prop(series: Series, config: PipelineConfig, station: str = "series") -> ForecastResult:
    config = replace(config, variant=Variant.PROP)
    return _run_lstm(series, config, station, None)


def run_fixed_lag(series: Series, config: PipelineConfig, station: str = "series") -> ForecastResult:
    if not config.variant.is_lstm or config.variant is Variant.PROP:
        raise ValueError(f"{config.variant.value} is not a fixed-lag LSTM variant")
    m = lag_for_variant(config.variant, series.period, config.split.test_len)
    return _run_lstm(series, config, station, m)


def run_baseline(series: Series, config: PipelineConfig, station: str = "series") -> ForecastResult:
    """Classical baselines fit on the raw train+validation series."""
    start = time.perf_counter()
    n_tv = len(series) - config.split.test_len
    if n_tv <= config.split.validation_len:
        raise SeriesTooShort("series too short for the configured split")
    history = series.slice(0, n_tv)
    horizon = config.split.test_len
    if config.variant is Variant.SEASONAL_NAIVE:
        y_hat = baselines.seasonal_naive(history, horizon)
    elif config.variant is Variant.HOLT_WINTERS:
        y_hat = baselines.holt_winters_fit_forecast(history, horizon)
    else:
        raise ValueError(f"{config.variant.value} is not a baseline")
    return ForecastResult(station, config.variant, y_hat, series.values[n_tv:].copy(),
                          seconds=time.perf_counter() - start)


def run_variant(series: Series, config: PipelineConfig, station: str = "series") -> ForecastResult:
    if config.variant is Variant.PROP:
        return run_prop(series, config, station)
    if config.variant.is_lstm:
        return run_fixed_lag(series, config, station)
    return run_baseline(series, config, station)
