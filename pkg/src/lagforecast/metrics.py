"""Point-forecast error measures and per-timepoint average rank."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import EmptyInput, LengthMismatch

SMAPE_EPSILON = 0.1


def _pair(actual, predicted):
    a = np.asarray(actual, dtype=float)
    p = np.asarray(predicted, dtype=float)
    if a.shape != p.shape:
        raise LengthMismatch(f"actual has shape {a.shape}, predicted {p.shape}")
    if a.size == 0:
        raise EmptyInput("metrics need at least one point")
    return a, p


def rmse(actual, predicted) -> float:
    a, p = _pair(actual, predicted)
    return float(np.sqrt(np.mean((a - p) ** 2)))


def mae(actual, predicted) -> float:
    a, p = _pair(actual, predicted)
    return float(np.mean(np.abs(a - p)))


def smape_modified(actual, predicted, epsilon: float = SMAPE_EPSILON, literal: bool = False) -> float:
    """SMAPE with the floored denominator max(|y| + |yhat| + eps, 0.5 + eps).

    ``literal=True`` wraps the sum in a square root before scaling by 100/h,
    reproducing the typeset formula rather than the usual definition.
    """
    a, p = _pair(actual, predicted)
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    denom = np.maximum(np.abs(a) + np.abs(p) + epsilon, 0.5 + epsilon)
    ratios = np.abs(a - p) / denom
    h = len(a)
    if literal:
        return float(100.0 / h * np.sqrt(ratios.sum()))
    return float(100.0 / h * ratios.sum())


def arank(actual, predictions: Sequence) -> np.ndarray:
    """Mean rank of each model's absolute error across time points (ties averaged)."""
    a = np.asarray(actual, dtype=float)
    P = np.atleast_2d(np.asarray(predictions, dtype=float))
    if P.shape[0] < 2:
        raise ValueError("average rank needs at least two models")
    if P.shape[1] != len(a):
        raise LengthMismatch(f"predictions have length {P.shape[1]}, actual {len(a)}")
    if len(a) == 0:
        raise EmptyInput("metrics need at least one point")
    errors = np.abs(P - a[None, :])  # (models, time)
    ranks = rankdata(errors, method="average", axis=0)
    return ranks.mean(axis=1)


@dataclass(frozen=True)
class MetricSet:
    rmse: float
    mae: float
    smape: float
    arank: Optional[float] = None

    def as_dict(self) -> dict:
        out = {"rmse": self.rmse, "mae": self.mae, "smape": self.smape}
        if self.arank is not None:
            out["arank"] = self.arank
        return out


def metric_set(actual, predicted, arank_value: Optional[float] = None) -> MetricSet:
    return MetricSet(rmse(actual, predicted), mae(actual, predicted),
                     smape_modified(actual, predicted), arank_value)
