import math

import numpy as np
import pytest

import binar


def test_simulate_and_fit():
    spec = binar.benchmark_spec()
    series = binar.simulate_series(spec, 2000, 7)
    assert series.length == 2000
    again = binar.simulate_series(spec, 2000, 7)
    assert series.x == again.x
    fit = binar.fit_mple(series, spec.n)
    assert fit.converged
    assert np.max(np.abs(binar.score(series, spec.n, fit.beta_hat))) < 1e-8
    se = fit.standard_errors()
    assert np.all(np.abs(fit.beta_hat.values - spec.beta.values) < 5 * se)


def test_scalar_functions():
    beta = binar.ParamVector(-1.0, 0.1, [0.4])
    assert binar.success_prob(beta, np.array([1.0, 0.0, 1.0])) == pytest.approx(1 / (1 + math.exp(0.6)))
    assert binar.rho(1.0, 0.0) == 0.5
    assert binar.weight(100, 100, 0.0) == pytest.approx(0.05)
    assert binar.chi_square_sf(3.841, 1) == pytest.approx(0.05, abs=1e-3)
    assert binar.link_eval(7.5, 10) == pytest.approx(math.log(3))


def test_monitor_roundtrip():
    spec = binar.benchmark_spec()
    full = binar.simulate_series(spec, 400, 3)
    training = binar.SeriesSample(full.x[:101], full.w[:100])
    fit, mon = binar.monitor_init(training, spec.n, threshold=float("inf"))
    assert mon.k == 0 and mon.max_k == 300
    for t in range(101, 401):
        stat = mon.update(full.x[t], full.w[t - 1])
        assert stat >= 0
    assert mon.alarm_at is None
    assert len(mon.history) == 300
    with pytest.raises(binar.MonitorTerminatedError):
        mon.update(1, np.array([1.0]))


def test_threshold_table_and_errors():
    cfg = binar.CalibrationConfig()
    cfg.sigma = np.eye(3)
    cfg.reps = 200
    cfg.grid_m = 100
    table = binar.threshold_table(cfg)
    assert len(table.cells) == 12
    assert table.at(0.4, 0.01) >= table.at(0.4, 0.1)
    with pytest.raises(binar.ThresholdUnavailableError):
        table.at(0.3, 0.05)
    with pytest.raises(binar.SeparationError):
        binar.fit_mple(binar.SeriesSample([1, 5, 5, 5, 5]), 5)


def test_stationary_oracle_and_comparison():
    P, pmf = binar.stationary_oracle(binar.benchmark_spec())
    assert np.allclose(P.sum(axis=1), 1.0, atol=1e-12)
    assert np.allclose(pmf @ P, pmf, atol=1e-10)
    cmp = binar.model_comparison([2, 0, 0, 2, 1, 1, 2, 1, 0, 1], 2)
    assert cmp.lr_stat >= -1e-6
    assert 0.0 <= cmp.p_value <= 1.0
