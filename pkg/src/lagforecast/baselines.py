"""Reference forecasters: seasonal naive and additive Holt-Winters."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SeriesTooShort
from .series import ArrayOrSeries, Series, _values

GRID = np.round(np.linspace(0.0, 1.0, 21), 10)


def _period(history, period):
    if period is None:
        return history.period if isinstance(history, Series) else 12
    return int(period)


def seasonal_naive(history: ArrayOrSeries, horizon: int, period: int | None = None) -> np.ndarray:
    """Repeat the last observed season: y[T+h] = y[T+h-period*ceil(h/period)]."""
    p = _period(history, period)
    y = _values(history)
    if len(y) < p:
        raise SeriesTooShort(f"seasonal naive needs at least one season ({p} points)")
    last = y[len(y) - p:]
    return np.array([last[(h - 1) % p] for h in range(1, horizon + 1)])


@dataclass(frozen=True)
class HoltWintersParams:
    alpha: float
    beta: float
    gamma: float
    period: int


@dataclass(frozen=True)
class HoltWintersFit:
    params: HoltWintersParams
    level: float
    trend: float
    seasonal: np.ndarray  # last `period` seasonal states, oldest first
    mse: float

    def forecast(self, horizon: int) -> np.ndarray:
        p = self.params.period
        h = np.arange(1, horizon + 1)
        return self.level + h * self.trend + self.seasonal[(h - 1) % p]


def _run(y, p, alpha, beta, gamma):
    """Additive recursions for arrays of parameter triples; returns final states and MSE."""
    # first-season mean sits at time (p-1)/2; seasonal indices are detrended
    m0 = y[:p].mean()
    b0 = (y[p:2 * p].mean() - m0) / p
    level = np.full(alpha.shape, m0 + 0.5 * (p - 1) * b0)
    trend = np.full(alpha.shape, b0)
    season = [np.full(alpha.shape, y[i] - m0 - (i - 0.5 * (p - 1)) * b0) for i in range(p)]
    sse = np.zeros(alpha.shape)
    for t in range(p, len(y)):
        s_old = season[t % p]
        err = y[t] - (level + trend + s_old)
        sse += err * err
        new_level = alpha * (y[t] - s_old) + (1.0 - alpha) * (level + trend)
        trend = beta * (new_level - level) + (1.0 - beta) * trend
        season[t % p] = gamma * (y[t] - new_level) + (1.0 - gamma) * s_old
        level = new_level
    n = len(y) - p
    ordered = [season[(len(y) + j) % p] for j in range(p)]
    return level, trend, ordered, sse / n


def holt_winters_fit(history: ArrayOrSeries, period: int | None = None) -> HoltWintersFit:
    """Grid-search (alpha, beta, gamma) over {0, 0.05, ..., 1}^3 by one-step in-sample MSE.

    Ties go to the lexicographically smallest triple.
    """
    p = _period(history, period)
    y = _values(history)
    if len(y) < 2 * p:
        raise SeriesTooShort(f"Holt-Winters needs at least two seasons ({2 * p} points)")
    a, b, g = np.meshgrid(GRID, GRID, GRID, indexing="ij")
    a, b, g = a.ravel(), b.ravel(), g.ravel()
    level, trend, season, mse = _run(y, p, a, b, g)
    # meshgrid with ij ordering is already lexicographic, so argmin breaks ties correctly
    k = int(np.argmin(mse))
    params = HoltWintersParams(float(a[k]), float(b[k]), float(g[k]), p)
    return HoltWintersFit(params, float(level[k]), float(trend[k]),
                          np.array([s[k] for s in season]), float(mse[k]))


def holt_winters_fit_forecast(history: ArrayOrSeries, horizon: int, period: int | None = None) -> np.ndarray:
    return holt_winters_fit(history, period).forecast(horizon)


def holt_winters_mse(history: ArrayOrSeries, params: HoltWintersParams) -> float:
    """In-sample one-step MSE at a single parameter triple."""
    y = _values(history)
    one = lambda v: np.array([v])  # noqa: E731
    *_, mse = _run(y, params.period, one(params.alpha), one(params.beta), one(params.gamma))
    return float(mse[0])
