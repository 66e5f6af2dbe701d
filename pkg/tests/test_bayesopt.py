import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import norm

from lagforecast.bayesopt import (
    Dimension, SearchSpace, _ei_at, bo_optimize, default_space, ei_array,
    expected_improvement, g_map, latin_hypercube, maximize_acquisition,
)
from lagforecast.errors import OutOfBounds
from lagforecast.gp import Kernel, KernelKind, Posterior, build_state, gp_fit


def test_default_space_bounds():
    space = default_space()
    assert space.names == ["m", "dr", "lr", "hu1", "hu2", "b"]
    assert default_space(include_lag=False).names == ["dr", "lr", "hu1", "hu2", "b"]
    m = space.dims[0]
    # lags picked for the nine stations in the original study sit inside the box
    for lag in (34, 32, 36, 45, 34, 38, 31, 33, 35):
        assert m.low <= lag <= m.high


def test_g_map_rounding():
    space = default_space()
    raw = np.array([34.7, 0.23, -3.0, 63.5, 4.0, 8.49])
    p = g_map(raw, space)
    assert p == {"m": 35, "dr": 0.23, "lr": pytest.approx(1e-3), "hu1": 64, "hu2": 4, "b": 8}


def test_g_map_out_of_bounds():
    space = default_space()
    with pytest.raises(OutOfBounds):
        g_map(np.array([61.0, 0.2, -3, 10, 10, 10]), space)
    with pytest.raises(OutOfBounds):
        g_map(np.array([10.0, 0.2]), space)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=6, max_size=6))
def test_g_map_idempotent(u):
    space = default_space()
    p = g_map(space.to_raw(u), space)
    again = g_map(space.embed(p), space)
    for k in p:
        assert again[k] == pytest.approx(p[k], rel=1e-12)


def test_unit_roundtrip():
    space = default_space()
    u = np.random.default_rng(0).uniform(size=6)
    np.testing.assert_allclose(space.to_unit(space.to_raw(u)), u)


def test_ei_closed_form_values():
    assert expected_improvement(Posterior(0.0, 0.0), 0.0) == 0.0
    assert expected_improvement(Posterior(-1.0, 0.0), 0.0) == 0.0
    assert expected_improvement(Posterior(2.0, 0.0), 0.5) == pytest.approx(1.5)
    assert expected_improvement(Posterior(1.0, 1.0), 1.0) == pytest.approx(0.398942, abs=1e-6)
    assert expected_improvement(Posterior(3.0, 1.0), 1.0) == pytest.approx(2.00850, abs=1e-5)


def test_ei_against_scipy_formula():
    rng = np.random.default_rng(1)
    mu, sd, fb = rng.normal(size=500), rng.uniform(0.01, 3, size=500), rng.normal(size=500)
    u = (mu - fb) / sd
    ref = (mu - fb) * norm.cdf(u) + sd * norm.pdf(u)
    np.testing.assert_allclose([ei_array([m], [s], f)[0] for m, s, f in zip(mu, sd, fb)], ref, atol=1e-12)


def test_ei_non_negative():
    rng = np.random.default_rng(2)
    vals = ei_array(rng.normal(scale=10, size=10_000), rng.exponential(size=10_000), rng.normal(scale=10))
    assert np.all(vals >= 0)


def test_latin_hypercube_strata():
    X = latin_hypercube(10, 3, 0)
    for j in range(3):
        assert sorted(np.floor(X[:, j] * 10).astype(int)) == list(range(10))


def test_acquisition_beats_candidates():
    state = build_state([[0.5, 0.5]], [1.0], Kernel(KernelKind.MATERN52, [0.2, 0.2], 1.0))
    x = maximize_acquisition(state, 1.0, rng=3)
    cands = np.random.default_rng(3).uniform(size=(2048, 2))
    assert _ei_at(state, x[None, :], 1.0)[0] >= _ei_at(state, cands, 1.0).max() - 1e-15


def test_acquisition_fallback_when_ei_vanishes():
    state = build_state([[0.2], [0.6]], [0.0, 0.0], Kernel(KernelKind.MATERN52, [0.3], 1e-4))
    x = maximize_acquisition(state, 1e3, rng=4)
    assert x.shape == (1,) and 0 <= x[0] <= 1
    assert _ei_at(state, x[None, :], 1e3)[0] == 0.0


def test_acquisition_matches_dense_grid():
    X = np.array([[0.05], [0.3], [0.45], [0.7], [0.95]])
    y = -(X[:, 0] - 0.5) ** 2
    state = gp_fit(X, y, rng=0)
    grid = np.linspace(0, 1, 10_000)[:, None]
    target = grid[np.argmax(_ei_at(state, grid, y.max())), 0]
    x = maximize_acquisition(state, y.max(), rng=5)
    assert abs(x[0] - target) < 0.2


def _toy(params, iteration):
    return -(params["x"] - 0.37) ** 2


def test_bo_zero_iterations_returns_best_initial():
    space = SearchSpace([Dimension("x", 0.0, 1.0)])
    best, trace = bo_optimize(_toy, space, n_initial=6, n_iterations=0, rng=0)
    assert len(trace) == 6
    assert best == max(trace.records, key=lambda r: r.value).params


def test_bo_trace_monotone_and_deterministic():
    space = SearchSpace([Dimension("x", 0.0, 1.0)])
    _, t1 = bo_optimize(_toy, space, 5, 8, rng=11)
    _, t2 = bo_optimize(_toy, space, 5, 8, rng=11)
    assert [r.raw for r in t1.records] == [r.raw for r in t2.records]
    best = [r.best_so_far for r in t1.records]
    assert all(b2 >= b1 for b1, b2 in zip(best, best[1:]))


def test_bo_records_failures_and_continues():
    space = SearchSpace([Dimension("x", 0.0, 1.0)])

    def flaky(params, iteration):
        return math.nan if params["x"] > 0.6 else -(params["x"] - 0.3) ** 2

    best, trace = bo_optimize(flaky, space, 5, 5, rng=2)
    vals = trace.values()
    assert np.all(np.isfinite(vals) | (vals == -math.inf))
    assert best["x"] <= 0.6


def test_bo_all_failed_keeps_going():
    space = SearchSpace([Dimension("x", 0.0, 1.0)])
    _, trace = bo_optimize(lambda p, i: -math.inf, space, 3, 3, rng=0)
    assert len(trace) == 6 and np.all(trace.values() == -math.inf)


def test_bo_caches_duplicates():
    space = SearchSpace([Dimension("m", 2, 5, discrete=True)])
    calls = []

    def f(params, iteration):
        calls.append(params["m"])
        return -abs(params["m"] - 3)

    _, trace = bo_optimize(f, space, 4, 6, rng=0)
    assert len(calls) == len(set(calls))
    assert sum(r.cached for r in trace.records) == len(trace) - len(calls)


def test_bo_propagates_errors():
    space = SearchSpace([Dimension("x", 0.0, 1.0)])

    def boom(params, iteration):
        raise RuntimeError("boom")

    with pytest.raises(RuntimeError):
        bo_optimize(boom, space, 3, 1, rng=0)
