import math

import numpy as np
import pytest

from mfsde import (BlowUpError, MeasureFlow, PicardConfig,
                   PicardConvergenceError, SeedSpec, constant_drift, dirac,
                   direct_particle_solve, euler_under_flow, expectation_drift,
                   flow_distance, make_grid, mean_and_se, mean_field_ou,
                   moment_diagnostics, picard_solve, sample_brownian,
                   sign_drift, zero_drift)
from oracles import ou_mean_ode

SEED = SeedSpec(314159)


def test_zero_drift_returns_the_driving_noise():
    grid = make_grid(1.0, 40)
    result = picard_solve(zero_drift(), 0.7, grid, 256, SEED)
    assert np.array_equal(result.ensemble.values, result.brownian.values)
    # the brownian initial flow is already the fixed point
    assert result.iterations == 1
    assert result.residual == 0.0
    assert result.ensemble.kind == "solution"


def test_constant_drift_shifts_paths_exactly():
    grid = make_grid(1.0, 25)
    c = 0.8
    result = picard_solve(constant_drift(c), 0.0, grid, 128, SEED)
    want = result.brownian.values + c * grid.nodes[None, :]
    assert np.allclose(result.ensemble.values, want, atol=1e-12)


def test_direct_solve_mean_follows_exact_affine_recursion():
    # with the live empirical mean in the drift, the ensemble mean obeys
    # m_{k+1} = (1 + (kappa - theta) dt) m_k + mean(dB_k) to float precision
    theta, kappa = 1.0, 0.5
    grid = make_grid(1.0, 30)
    result = direct_particle_solve(mean_field_ou(theta, kappa), 1.0, grid,
                                   512, SEED)
    means = result.ensemble.values.mean(axis=0)
    db = np.diff(result.brownian.values, axis=1).mean(axis=0)
    expected = np.empty(31)
    expected[0] = 1.0
    for k in range(30):
        expected[k + 1] = (1 + (kappa - theta) * grid.dt) * expected[k] + db[k]
    assert np.allclose(means, expected, atol=1e-12)


def test_picard_matches_ode_oracle_mean_curve():
    theta, kappa = 1.0, 0.5
    grid = make_grid(1.0, 100)
    result = picard_solve(mean_field_ou(theta, kappa), 1.0, grid, 20_000,
                          SEED)
    values = result.ensemble.values
    for k in (25, 50, 75, 100):
        m, se = mean_and_se(values[:, k])
        oracle = ou_mean_ode(theta, kappa, 1.0, grid.nodes[k])
        # 3 SE for the noise plus a first-order-in-dt discretization slack
        assert abs(m - oracle) <= 3 * se + 2.0 * grid.dt, f"node {k}"


def test_picard_and_direct_agree():
    grid = make_grid(1.0, 50)
    spec = mean_field_ou()
    a = picard_solve(spec, 1.0, grid, 20_000, SEED)
    b = direct_particle_solve(spec, 1.0, grid, 20_000, SEED)
    ma, sa = mean_and_se(a.ensemble.terminal())
    mb, sb = mean_and_se(b.ensemble.terminal())
    assert abs(ma - mb) <= 3 * (sa + sb) + 2.0 * grid.dt


def test_frozen_flow_reproduces_the_ensemble_bit_for_bit():
    grid = make_grid(1.0, 40)
    result = picard_solve(mean_field_ou(), 1.0, grid, 2000, SEED)
    replay = euler_under_flow(mean_field_ou(), result.frozen_flow, 1.0,
                              grid, 2000, SEED)
    assert np.array_equal(replay.values, result.ensemble.values)


def test_euler_reuses_supplied_brownian():
    grid = make_grid(1.0, 20)
    paths = sample_brownian(grid, 100, 0.0, SEED)
    flow = MeasureFlow.constant(grid, dirac(0.0))
    out = euler_under_flow(constant_drift(1.0), flow, 0.0, grid, 100, SEED,
                           brownian=paths)
    assert np.allclose(out.values, paths.values + grid.nodes[None, :])


def test_residual_history_shrinks_and_converges():
    grid = make_grid(1.0, 60)
    result = picard_solve(mean_field_ou(), 1.0, grid, 5000, SEED,
                          PicardConfig(tolerance=1e-4, max_iterations=40))
    hist = result.residual_history
    assert result.residual == hist[-1]
    assert hist[-1] < 1e-4
    assert len(hist) == result.iterations
    # geometric-style decay: each residual beats its predecessor
    assert all(b < a for a, b in zip(hist, hist[1:]))


def test_initial_flow_choice_lands_on_the_same_fixed_point():
    grid = make_grid(1.0, 50)
    for builder in (mean_field_ou, sign_drift):
        spec = builder()
        cfg_b = PicardConfig(tolerance=1e-3, initial_flow="brownian")
        cfg_d = PicardConfig(tolerance=1e-3, initial_flow="dirac")
        ra = picard_solve(spec, 1.0, grid, 10_000, SEED, cfg_b)
        rb = picard_solve(spec, 1.0, grid, 10_000, SEED, cfg_d)
        assert flow_distance(ra.flow, rb.flow) <= 2e-3, spec.name


def test_picard_convergence_error_carries_history():
    grid = make_grid(1.0, 40)
    with pytest.raises(PicardConvergenceError) as err:
        picard_solve(mean_field_ou(), 1.0, grid, 2000, SEED,
                     PicardConfig(tolerance=1e-12, max_iterations=2))
    assert len(err.value.residuals) == 2
    assert err.value.tolerance == 1e-12


def test_blow_up_raises_with_step_context():
    # growth far beyond the declared constant: paths explode quickly
    rocket = expectation_drift(
        bbar=lambda t, y, v: 40.0 * y, functional=lambda z: z,
        growth_const=40.0, law_lipschitz_const=0.0, name="rocket")
    grid = make_grid(4.0, 80)
    with pytest.raises(BlowUpError) as err:
        picard_solve(rocket, 1.0, grid, 64, SEED)
    assert err.value.step > 0


def test_moment_diagnostics_envelope():
    grid = make_grid(1.0, 50)
    result = picard_solve(mean_field_ou(), 1.0, grid, 5000, SEED)
    report = moment_diagnostics(result, orders=(1.0, 2.0))
    assert report.node_moments.shape == (2, 51)
    assert not report.flagged
    assert report.envelope_ratio <= report.envelope_limit
    # second moments stay bounded along the run
    assert report.max_moments[1] < 5.0

    # a drift whose declared growth constant is a lie gets flagged
    liar = expectation_drift(
        bbar=lambda t, y, v: 6.0 * y, functional=lambda z: z,
        growth_const=0.01, law_lipschitz_const=0.0, name="liar")
    flagged = moment_diagnostics(picard_solve(liar, 1.0, grid, 500, SEED))
    assert flagged.flagged


def test_solver_rejects_bad_particle_count():
    grid = make_grid(1.0, 10)
    with pytest.raises(ValueError):
        picard_solve(zero_drift(), 0.0, grid, 0, SEED)


def test_direct_solve_result_shape():
    grid = make_grid(0.5, 20)
    result = direct_particle_solve(sign_drift(), 0.1, grid, 300, SEED)
    assert result.method == "direct"
    assert result.iterations == 1
    assert result.ensemble.values.shape == (300, 21)
    assert np.all(result.ensemble.values[:, 0] == 0.1)
