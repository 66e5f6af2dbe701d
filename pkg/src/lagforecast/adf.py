"""Augmented Dickey-Fuller test with constant and linear trend.

The p-value is interpolated in Fuller's tabulated critical values (the same
table R's ``tseries::adf.test`` uses), so it saturates at 0.01 and 0.99.
"""

from __future__ import annotations

import math
from typing import NamedTuple, Optional

import numpy as np

from .errors import SeriesTooShort, SingularRegression
from .series import ArrayOrSeries, _values

# rows: sample sizes; columns: probabilities (model with constant and trend)
_TABLE_T = np.array([25, 50, 100, 250, 500, 100_000], dtype=float)
_TABLE_P = np.array([0.01, 0.025, 0.05, 0.10, 0.90, 0.95, 0.975, 0.99])
_TABLE = -np.array([
    [4.38, 3.95, 3.60, 3.24, 1.14, 0.80, 0.50, 0.15],
    [4.15, 3.80, 3.50, 3.18, 1.19, 0.87, 0.58, 0.24],
    [4.04, 3.73, 3.45, 3.15, 1.22, 0.90, 0.62, 0.28],
    [3.99, 3.69, 3.43, 3.13, 1.23, 0.92, 0.64, 0.31],
    [3.98, 3.68, 3.42, 3.13, 1.24, 0.93, 0.65, 0.32],
    [3.96, 3.66, 3.41, 3.12, 1.25, 0.94, 0.66, 0.33],
])

P_MIN, P_MAX = float(_TABLE_P[0]), float(_TABLE_P[-1])


class ADFResult(NamedTuple):
    statistic: float
    p_value: float

    @property
    def clamped(self) -> bool:
        """True when the statistic falls outside the table and p saturated."""
        return self.p_value <= P_MIN or self.p_value >= P_MAX


def default_max_lag(n: int) -> int:
    return int(math.trunc((n - 1) ** (1.0 / 3.0)))


def adf_p_value(statistic: float, n_diff: int) -> float:
    """Interpolate the tabulated distribution; ``n_diff`` is the number of differences."""
    crit = np.array([np.interp(n_diff, _TABLE_T, _TABLE[:, j]) for j in range(len(_TABLE_P))])
    return float(np.interp(statistic, crit, _TABLE_P))


def adf_test(series: ArrayOrSeries, max_lag: Optional[int] = None) -> ADFResult:
    """Regress dy_t on y_{t-1}, a constant, a trend and ``max_lag`` lagged differences.

    The statistic is the t-ratio of the y_{t-1} coefficient.
    """
    y = _values(series)
    if max_lag is None:
        max_lag = default_max_lag(len(y))
    max_lag = int(max_lag)
    if max_lag < 0:
        raise ValueError("max_lag must be non-negative")
    if len(y) < max_lag + 3:
        raise SeriesTooShort(f"ADF with {max_lag} lags needs at least {max_lag + 3} points")
    dy = np.diff(y)
    n = len(dy)
    k = max_lag + 1
    rows = n - k + 1
    n_params = 3 + max_lag
    if rows <= n_params:
        raise SeriesTooShort(f"ADF with {max_lag} lags leaves {rows} rows for {n_params} parameters")

    target = dy[k - 1:]
    columns = [y[k - 1:n], np.ones(rows), np.arange(k, n + 1, dtype=float)]
    for j in range(1, k):
        columns.append(dy[k - 1 - j:n - j])
    X = np.column_stack(columns)
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise SingularRegression("ADF design matrix is rank deficient")

    coef, _, _, _ = np.linalg.lstsq(X, target, rcond=None)
    resid = target - X @ coef
    sigma2 = resid @ resid / (rows - n_params)
    xtx_inv = np.linalg.inv(X.T @ X)
    se = math.sqrt(sigma2 * xtx_inv[0, 0])
    if se == 0.0:
        raise SingularRegression("zero standard error for the lagged level")
    stat = float(coef[0] / se)
    return ADFResult(stat, adf_p_value(stat, n))
