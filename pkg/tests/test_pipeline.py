import math

import numpy as np
import pytest

from lagforecast.bayesopt import Dimension, SearchSpace
from lagforecast.data import generate_synthetic
from lagforecast.errors import PipelineFailed, SeriesTooShort
from lagforecast.metrics import rmse
from lagforecast.pipeline import (
    HyperParams, PipelineConfig, Variant, derive_seed, lag_for_variant, objective_eval,
    run_baseline, run_fixed_lag, run_prop, run_variant, validation_score,
)
from lagforecast.series import NormSource, Series, SplitSpec, normalize, split

SMALL = SearchSpace([
    Dimension("m", 2, 24, discrete=True),
    Dimension("dr", 0.0, 0.3),
    Dimension("lr", 1e-3, 3e-2, log_scale=True),
    Dimension("hu1", 2, 6, discrete=True),
    Dimension("hu2", 2, 6, discrete=True),
    Dimension("b", 32, 64, discrete=True),
])


def _config(**kw):
    base = dict(split=SplitSpec(24, 24), space=SMALL, n_initial=3, n_iterations=1, epochs=4, patience=5, seed=5)
    base.update(kw)
    return PipelineConfig(**base)


def _series(n=180, seed=0):
    return generate_synthetic("seasonal-ar", n, seed)


def test_lag_rules():
    assert lag_for_variant("LSL", 12, 60) == 12
    assert lag_for_variant("LFH1p25", 12, 60) == 15
    assert lag_for_variant("LFH1", 12, 60) == 60
    assert lag_for_variant("PROP", 12, 60) is None
    assert lag_for_variant("LFH1p25", 10, 5) == 13  # 12.5 rounds half up
    with pytest.raises(ValueError):
        lag_for_variant("holt-winters", 12, 60)


def test_seed_derivation_distinct():
    seeds = {derive_seed(0, s, v, p, i) for s in ("A", "B") for v in ("PROP", "LSL") for p in (0, 1, 2) for i in (0, 1)}
    assert len(seeds) == 2 * 2 * 3 * 2
    assert derive_seed(3, "A", "PROP", 1, 4) == derive_seed(3, "A", Variant.PROP, 1, 4)


def test_validation_score():
    zv = np.array([0.2, 0.5, 0.9])
    assert validation_score(zv, zv) == 0.0
    assert validation_score(np.zeros(3), zv) == pytest.approx(-np.mean(zv**2))
    assert validation_score([np.nan, 0, 0], zv) == -math.inf


def test_hyperparams_roundtrip():
    hp = HyperParams(34, 0.1, 1e-3, 64, 32, 16)
    assert HyperParams.from_dict(hp.as_dict()) == hp
    assert HyperParams.from_dict({k: v for k, v in hp.as_dict().items() if k != "m"}, m=12).m == 12
    cfg = hp.lstm_config(60, 20, 7)
    assert (cfg.m, cfg.hidden1, cfg.hidden2, cfg.batch_size, cfg.epochs, cfg.seed) == (34, 64, 32, 16, 60, 7)


def test_objective_eval_deterministic_and_bounded():
    data = split(_series(), SplitSpec(24, 24))
    hp = HyperParams(6, 0.1, 1e-2, 3, 3, 32)
    a = objective_eval(hp, data, epochs=3, seed=1)
    assert a == objective_eval(hp, data, epochs=3, seed=1)
    assert a <= 0.0


def test_objective_lag_too_large_is_minus_inf():
    data = split(_series(), SplitSpec(24, 24))
    assert objective_eval(HyperParams(200, 0.0, 1e-2, 2, 2, 8), data, epochs=1) == -math.inf


def test_objective_divergence_is_minus_inf():
    data = split(_series(), SplitSpec(24, 24))
    hp = HyperParams(6, 0.0, 1e38, 3, 3, 32)
    assert objective_eval(hp, data, epochs=2) == -math.inf


def test_run_prop_shapes_and_determinism():
    s = _series()
    a = run_prop(s, _config())
    b = run_prop(s, _config())
    assert a.variant is Variant.PROP and len(a.forecasts) == 24
    assert np.all(np.isfinite(a.forecasts))
    np.testing.assert_array_equal(a.actual, s.values[-24:])
    assert 2 <= a.params.m <= 24
    assert a.params == b.params
    np.testing.assert_array_equal(a.forecasts, b.forecasts)
    best = [r.best_so_far for r in a.trace.records]
    assert all(y >= x for x, y in zip(best, best[1:]))
    assert a.validation_objective == max(r.value for r in a.trace.records)


def test_fixed_lag_pins_m():
    s = _series()
    res = run_fixed_lag(s, _config(variant="LSL"))
    assert res.params.m == 12
    assert "m" not in res.trace.names
    assert all("m" not in r.params for r in res.trace.records)
    res = run_fixed_lag(s, _config(variant="LFH1"))
    assert res.params.m == 24


def test_prop_and_lsl_traces_differ_by_lag_dimension():
    s = _series()
    p = run_prop(s, _config())
    l = run_fixed_lag(s, _config(variant="LSL"))
    assert p.trace.names == ["m"] + l.trace.names
    assert len(p.trace) == len(l.trace)


def test_sawtooth_without_deseasonalizing():
    s = Series(np.tile(np.arange(12.0), 12))
    res = run_prop(s, _config(deseasonalize=False))
    assert np.all(np.isfinite(res.forecasts)) and len(res.forecasts) == 24


def test_final_model_never_sees_test_values():
    s = _series()
    values = s.values.copy()
    values[-24:] = 1e6  # a leak would blow up the scaling
    res = run_prop(Series(values, 12, s.start_label), _config())
    ref = run_prop(s, _config())
    np.testing.assert_array_equal(res.forecasts, ref.forecasts)


def test_all_failures_raise():
    space = SearchSpace([Dimension("dr", 0.0, 0.1), Dimension("lr", 1e37, 1e38, log_scale=True),
                         Dimension("hu1", 2, 3, discrete=True), Dimension("hu2", 2, 3, discrete=True),
                         Dimension("b", 32, 33, discrete=True)])
    with pytest.raises(PipelineFailed):
        run_fixed_lag(_series(), _config(space=SearchSpace((Dimension("m", 2, 3, discrete=True),) + space.dims), variant="LSL"))


def test_too_short():
    with pytest.raises(SeriesTooShort):
        run_prop(_series(40), _config())


def test_baselines_through_pipeline():
    s = _series()
    for v in ("seasonal-naive", "holt-winters"):
        res = run_variant(s, _config(variant=v))
        assert len(res.forecasts) == 24 and res.params is None
    naive = run_baseline(s, _config(variant="seasonal-naive"))
    np.testing.assert_array_equal(naive.forecasts, np.concatenate([s.values[-36:-24], s.values[-36:-24]]))


@pytest.mark.slow
def test_prop_beats_constant_mean():
    wins = 0
    cfg = PipelineConfig(space=SearchSpace([Dimension("m", 2, 60, discrete=True), *SMALL.dims[1:3],
                                            Dimension("hu1", 4, 16, discrete=True),
                                            Dimension("hu2", 4, 16, discrete=True),
                                            Dimension("b", 32, 128, discrete=True)]),
                         n_initial=3, n_iterations=2, epochs=20, patience=10)
    for seed in range(10):
        s = generate_synthetic("seasonal-ar", 480, 100 + seed)
        res = run_prop(s, PipelineConfig(**{**cfg.__dict__, "seed": seed}))
        assert 2 <= res.params.m <= 60
        mean_fc = np.full(60, s.values[:-60].mean())
        wins += rmse(res.actual, res.forecasts) < rmse(res.actual, mean_fc)
    assert wins >= 8
