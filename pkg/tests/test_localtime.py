import math

import numpy as np
import pytest

from mfsde import (SeedSpec, analytic_law_derivative, check_chain_identity,
                   drift_cumulants, first_variation, local_time_integral,
                   make_grid, malliavin_derivative, mean_field_ou,
                   picard_solve, sample_brownian, sign_drift)

SEED = SeedSpec(1_618_033)


def brownian(steps=200, n=2000, start=0.0, horizon=1.0):
    return sample_brownian(make_grid(horizon, steps), n, start, SEED)


def test_three_term_bookkeeping_is_exact():
    paths = brownian()
    r = local_time_integral(lambda t, y: np.sin(y + t), paths, 40, 160)
    assert np.array_equal(r.value, r.forward + r.backward + r.correction)
    assert r.s_node == 40 and r.t_node == 160
    assert r.value.shape == (2000,)


def test_constant_integrand_vanishes():
    # the local-time measure of a constant telescopes away; the three
    # pieces are accumulated separately so only rounding noise survives
    paths = brownian()
    r = local_time_integral(lambda t, y: np.ones_like(y), paths, 0, 200)
    assert np.max(np.abs(r.value)) < 1e-12


def test_linear_integrand_equals_negative_quadratic_variation():
    # for f(u, y) = y the scheme telescopes to -sum (dB)^2 exactly,
    # so the estimate sits at -(t - s) + O(sqrt(dt)) pathwise
    paths = brownian(steps=200)
    s, t = 50, 150
    r = local_time_integral(lambda u, y: y, paths, s, t)
    db = np.diff(paths.values[:, s:t + 1], axis=1)
    assert np.allclose(r.value, -(db ** 2).sum(axis=1), atol=1e-12)
    window = (t - s) * paths.grid.dt
    rms_err = float(np.sqrt(np.mean((r.value + window) ** 2)))
    predicted = math.sqrt(2.0 * paths.grid.dt * window)
    assert rms_err == pytest.approx(predicted, rel=0.15)


def test_integral_is_linear_in_the_integrand():
    paths = brownian(steps=100, n=500)
    f = lambda t, y: np.sin(y)
    g = lambda t, y: y * t
    rf = local_time_integral(f, paths, 0, 100).value
    rg = local_time_integral(g, paths, 0, 100).value
    combo = local_time_integral(
        lambda t, y: 2.0 * f(t, y) - 3.0 * g(t, y), paths, 0, 100).value
    assert np.allclose(combo, 2.0 * rf - 3.0 * rg, atol=1e-10)


def test_integral_is_additive_over_adjacent_windows():
    paths = brownian(steps=120, n=400)
    f = lambda t, y: np.cos(y - t)
    whole = local_time_integral(f, paths, 10, 110).value
    left = local_time_integral(f, paths, 10, 60).value
    right = local_time_integral(f, paths, 60, 110).value
    assert np.allclose(whole, left + right, atol=1e-12)


def test_smooth_oracle_for_sin_integrand():
    # for smooth f the local-time integral equals -int d/dy f(u, B_u) du
    paths = brownian(steps=400, n=1000)
    r = local_time_integral(lambda t, y: np.sin(y), paths, 0, 400)
    oracle = -np.trapezoid(np.cos(paths.values), dx=paths.grid.dt, axis=1)
    rms = float(np.sqrt(np.mean((r.value - oracle) ** 2)))
    assert rms < 3.0 * math.sqrt(paths.grid.dt)


def test_smooth_oracle_error_decays_at_half_order():
    errors, dts = [], []
    for steps in (100, 200, 400, 800):
        grid = make_grid(1.0, steps)
        paths = sample_brownian(grid, 1000, 0.0, SEED)
        r = local_time_integral(lambda t, y: np.sin(y), paths, 0, steps)
        oracle = -np.trapezoid(np.cos(paths.values), dx=grid.dt, axis=1)
        errors.append(float(np.sqrt(np.mean((r.value - oracle) ** 2))))
        dts.append(grid.dt)
    slope = np.polyfit(np.log(dts), np.log(errors), 1)[0]
    assert 0.35 <= slope <= 0.65


def test_node_window_validation():
    paths = brownian(steps=50, n=10)
    # the empty window integrates to exactly zero
    empty = local_time_integral(lambda t, y: y, paths, 30, 30)
    assert np.array_equal(empty.value, np.zeros(10))
    with pytest.raises(ValueError):
        local_time_integral(lambda t, y: y, paths, 31, 30)
    with pytest.raises(ValueError):
        local_time_integral(lambda t, y: y, paths, -1, 30)
    with pytest.raises(ValueError):
        local_time_integral(lambda t, y: y, paths, 0, 51)


def test_local_time_requires_brownian_kind():
    grid = make_grid(1.0, 30)
    result = picard_solve(mean_field_ou(), 1.0, grid, 50, SEED)
    with pytest.raises(ValueError):
        local_time_integral(lambda t, y: y, result.ensemble, 0, 30)


def test_malliavin_matches_linear_model_closed_form():
    # for drift -theta y + kappa E[mu] the noise derivative is
    # exp(-theta (t - s)), independent of the path
    theta = 1.0
    grid = make_grid(1.0, 400)
    result = picard_solve(mean_field_ou(theta=theta), 1.0, grid, 1000, SEED)
    for s, t in ((0, 400), (100, 300), (350, 400)):
        d = malliavin_derivative(result, s, t)
        want = math.exp(-theta * (t - s) * grid.dt)
        rms = float(np.sqrt(np.mean((d - want) ** 2)))
        assert rms <= 2.0 * math.sqrt(grid.dt), (s, t)


def test_malliavin_cocycle_and_positivity():
    for builder in (mean_field_ou, sign_drift):
        grid = make_grid(1.0, 200)
        result = picard_solve(builder(), 1.0, grid, 2000, SEED)
        c = drift_cumulants(result)
        full = malliavin_derivative(result, 0, 200, cumulants=c)
        split = (malliavin_derivative(result, 0, 80, cumulants=c)
                 * malliavin_derivative(result, 80, 200, cumulants=c))
        assert np.max(np.abs(full - split)) < 1e-12
        assert np.all(full > 0)


def test_first_variation_without_law_term():
    # kappa = 0 removes the law feedback: d X_t / dx = exp(-theta t)
    theta = 1.0
    grid = make_grid(1.0, 400)
    result = picard_solve(mean_field_ou(theta=theta, kappa=0.0), 1.0, grid,
                          1000, SEED)
    fv = first_variation(result)
    want = np.exp(-theta * grid.nodes)
    rms = float(np.sqrt(np.mean((fv - want[None, :]) ** 2)))
    assert rms <= 2.0 * math.sqrt(grid.dt)


def test_first_variation_with_law_term_hits_closed_form():
    # with the mean feedback the initial-condition derivative is
    # exp((kappa - theta) t); kappa exp((kappa - theta) s) is the exact
    # x-derivative of the drift through the law argument
    theta, kappa = 1.0, 0.5
    grid = make_grid(1.0, 400)
    result = picard_solve(mean_field_ou(theta, kappa), 1.0, grid, 1000, SEED)
    dxb = analytic_law_derivative(
        lambda s, y: np.full_like(y, kappa * math.exp((kappa - theta) * s)))
    fv = first_variation(result, dxb=dxb)
    want = np.exp((kappa - theta) * grid.nodes)
    rms = float(np.sqrt(np.mean((fv - want[None, :]) ** 2)))
    assert rms <= 2.0 * math.sqrt(grid.dt)


def test_chain_identity_report():
    grid = make_grid(1.0, 400)
    result = picard_solve(mean_field_ou(), 1.0, grid, 1000, SEED)
    report = check_chain_identity(result, 0, 200, 400)
    assert report.chain_rms <= 5.0 * math.sqrt(grid.dt)
    assert report.cocycle_max < 1e-12
