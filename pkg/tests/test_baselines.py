import itertools

import numpy as np
import pytest

from lagforecast.baselines import (
    GRID, HoltWintersParams, holt_winters_fit, holt_winters_fit_forecast, holt_winters_mse,
    seasonal_naive,
)
from lagforecast.errors import SeriesTooShort
from lagforecast.series import Series


def test_seasonal_naive_repeats_last_season():
    y = np.arange(36.0)
    np.testing.assert_array_equal(seasonal_naive(y, 14), np.concatenate([y[24:], y[24:26]]))


def test_seasonal_naive_uses_series_period():
    s = Series(np.arange(8.0), period=4)
    np.testing.assert_array_equal(seasonal_naive(s, 4), [4, 5, 6, 7])


def test_seasonal_naive_too_short():
    with pytest.raises(SeriesTooShort):
        seasonal_naive(np.arange(5.0), 3)


def test_grid():
    assert len(GRID) == 21 and GRID[0] == 0.0 and GRID[-1] == 1.0


def test_holt_winters_linear_trend():
    y = 5.0 + 2.0 * np.arange(96)
    f = holt_winters_fit_forecast(y, 12)
    np.testing.assert_allclose(np.diff(f), 2.0, atol=1e-2)
    np.testing.assert_allclose(f, 5.0 + 2.0 * np.arange(96, 108), atol=0.2)


def test_holt_winters_constant():
    f = holt_winters_fit_forecast(np.full(48, 3.5), 10)
    np.testing.assert_allclose(f, 3.5, atol=1e-12)


def test_holt_winters_sinusoid():
    t = np.arange(120)
    y = 10 + np.sin(2 * np.pi * t / 12)
    f = holt_winters_fit_forecast(y, 24)
    truth = 10 + np.sin(2 * np.pi * np.arange(120, 144) / 12)
    assert np.corrcoef(f, truth)[0, 1] > 0.99
    np.testing.assert_allclose(f, truth, atol=0.05)


def test_grid_search_matches_brute_force():
    y = np.random.default_rng(0).gamma(2.0, 30.0, size=36) + np.tile(np.arange(12.0) * 5, 3)
    fit = holt_winters_fit(y)
    coarse = np.round(np.linspace(0, 1, 21), 10)
    best, best_mse = None, np.inf
    for a, b, g in itertools.product(coarse, coarse, coarse):
        mse = holt_winters_mse(y, HoltWintersParams(a, b, g, 12))
        if mse < best_mse:
            best, best_mse = (a, b, g), mse
    p = fit.params
    assert (p.alpha, p.beta, p.gamma) == best
    assert fit.mse == pytest.approx(best_mse)


def test_holt_winters_too_short():
    with pytest.raises(SeriesTooShort):
        holt_winters_fit(np.arange(20.0))
