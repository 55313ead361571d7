"""End-to-end acceptance battery at desk scale.

Each test checks one advertised guarantee of the package at its stated
tolerance and emits exactly one summary line (written past the capture so
it lands in plain pytest output). Tolerances are statistical (3 standard
errors), algebraic (rounding level), or fitted rates with stated bands.
"""

import json
import math
import sys
import time

import numpy as np
import pytest

from mfsde import (SeedSpec, bel_delta, call_payoff, check_chain_identity,
                   constant_drift, convolution_drift, direct_particle_solve,
                   drift_cumulants, expectation_drift, finite_difference_delta,
                   flow_distance, front_loaded_weight, identity_payoff,
                   local_time_integral, make_grid, malliavin_derivative,
                   mean_and_se, mean_field_ou, mollified_convergence_study,
                   pathwise_delta, picard_solve, PicardConfig,
                   reweighted_expectation, sample_brownian, sign_drift,
                   uniform_weight, zero_drift)
from mfsde.cli import main as cli_main
from oracles import ou_mean_ode

PIN = SeedSpec(20260816)
TARGET = math.exp(-0.5)


@pytest.fixture(scope="module")
def report(request):
    """One-line summary writer that reaches the real terminal.

    pytest captures at the file-descriptor level, so plain prints vanish
    for passing tests; the terminal reporter keeps a handle on the
    original stream and is the supported way to add lines to live output.
    """
    terminal = request.config.pluginmanager.getplugin("terminalreporter")

    def write(line: str) -> None:
        if terminal is not None:
            terminal.write_line("")
            terminal.write_line(line)
        else:
            sys.__stdout__.write(line + "\n")

    return write


def expectation_square_drift(theta=1.0, kappa=0.25):
    return expectation_drift(
        bbar=lambda t, y, v: -theta * y + kappa * v,
        functional=lambda z: z * z,
        growth_const=max(theta, 20.0 * kappa),
        law_lipschitz_const=20.0 * kappa,
        name="expectation_square",
        dbbar_dy=lambda t, y, v: np.full_like(y, -theta))


ALL_MODELS = [zero_drift, lambda: constant_drift(1.0), mean_field_ou,
              convolution_drift, sign_drift, expectation_square_drift]


@pytest.fixture(scope="module")
def ou_run():
    grid = make_grid(1.0, 200)
    t0 = time.perf_counter()
    result = picard_solve(mean_field_ou(1.0, 0.5), 1.0, grid, 100_000, PIN)
    wall = time.perf_counter() - t0
    return result, wall


def test_criterion_01_linear_model_oracle(ou_run, report):
    # the closed-form target is independently confirmed by a brute-force
    # sub-stepped ODE integration before the Monte Carlo comparison
    ode = ou_mean_ode(1.0, 0.5, 1.0, 1.0, steps=10_000)
    assert abs(ode - TARGET) < 2e-4
    result, wall = ou_run
    m, se = mean_and_se(result.ensemble.terminal())
    gap, tol = abs(m - TARGET), 3 * se
    ok = gap <= tol and wall < 30.0
    report(f"criterion 01 {'PASS' if ok else 'FAIL'}  "
           f"E[X_T]={m:.6f} target={TARGET:.6f} |gap|={gap:.6f} "
           f"<= {tol:.6f} (3 SE), wall={wall:.1f}s < 30s")
    assert gap <= tol
    assert wall < 30.0


def test_criterion_02_delta_reproduction(report):
    grid = make_grid(1.0, 200)
    n = 100_000
    b = bel_delta(mean_field_ou(), 1.0, grid, n, PIN, identity_payoff())
    p = pathwise_delta(mean_field_ou(), 1.0, grid, n, PIN, identity_payoff())
    h = 1e-2
    f = finite_difference_delta(mean_field_ou(), 1.0, grid, n, PIN,
                                identity_payoff(), h=h)
    gap_b = abs(b.estimate - TARGET)
    tol_b = 3 * b.stderr
    gap_p = abs(p.estimate - b.estimate)
    tol_p = 3 * (p.stderr + b.stderr)
    gap_f = abs(f.estimate - b.estimate)
    tol_f = 3 * (f.stderr + b.stderr) + h * h
    ok = gap_b <= tol_b and gap_p <= tol_p and gap_f <= tol_f
    report(f"criterion 02 {'PASS' if ok else 'FAIL'}  "
           f"bel={b.estimate:.6f} |gap|={gap_b:.6f} <= {tol_b:.6f}; "
           f"pathwise gap {gap_p:.6f} <= {tol_p:.6f}; "
           f"fd gap {gap_f:.6f} <= {tol_f:.6f}")
    assert gap_b <= tol_b
    assert gap_p <= tol_p
    assert gap_f <= tol_f


def test_criterion_03_weight_function_invariance(report):
    grid = make_grid(1.0, 200)
    n = 100_000
    lines = []
    ok = True
    for spec, payoff, tag in ((mean_field_ou(), identity_payoff(), "linear"),
                              (sign_drift(), call_payoff(0.0), "irregular")):
        ru = bel_delta(spec, 1.0, grid, n, PIN, payoff,
                       weight=uniform_weight(1.0))
        rf = bel_delta(spec, 1.0, grid, n, PIN, payoff,
                       weight=front_loaded_weight(1.0))
        gap = abs(ru.estimate - rf.estimate)
        tol = 3 * (ru.stderr + rf.stderr)
        ok = ok and gap <= tol
        lines.append(f"{tag} gap {gap:.6f} <= {tol:.6f}")
    report(f"criterion 03 {'PASS' if ok else 'FAIL'}  " + "; ".join(lines))
    assert ok


def test_criterion_04_local_time_rate(report):
    errors, dts = [], []
    for steps in (100, 200, 400, 800):
        grid = make_grid(1.0, steps)
        paths = sample_brownian(grid, 1000, 0.0, PIN)
        got = local_time_integral(lambda t, y: np.sin(y), paths, 0, steps)
        oracle = -np.trapezoid(np.cos(paths.values), dx=grid.dt, axis=1)
        errors.append(float(np.sqrt(np.mean((got.value - oracle) ** 2))))
        dts.append(grid.dt)
    slope = float(np.polyfit(np.log(dts), np.log(errors), 1)[0])
    ok = 0.35 <= slope <= 0.65
    report(f"criterion 04 {'PASS' if ok else 'FAIL'}  "
           f"smooth-oracle error slope {slope:.3f} in [0.35, 0.65]")
    assert ok


def test_criterion_05_cocycle_and_positivity(report):
    worst_gap, all_positive = 0.0, True
    grid = make_grid(1.0, 200)
    for builder in ALL_MODELS:
        result = picard_solve(builder(), 1.0, grid, 10_000, PIN)
        c = drift_cumulants(result)
        full = malliavin_derivative(result, 0, 200, cumulants=c)
        split = (malliavin_derivative(result, 0, 80, cumulants=c)
                 * malliavin_derivative(result, 80, 200, cumulants=c))
        worst_gap = max(worst_gap, float(np.max(np.abs(full - split))))
        all_positive = all_positive and bool(np.all(full > 0))
    ok = worst_gap < 1e-12 and all_positive
    report(f"criterion 05 {'PASS' if ok else 'FAIL'}  "
           f"cocycle max gap {worst_gap:.2e} < 1e-12 across "
           f"{len(ALL_MODELS)} models, positivity {all_positive}")
    assert ok


def test_criterion_06_chain_identity_residual(report):
    grid = make_grid(1.0, 400)
    result = picard_solve(mean_field_ou(), 1.0, grid, 10_000, PIN)
    rep = check_chain_identity(result, 0, 200, 400)
    tol = 5.0 * math.sqrt(grid.dt)
    ok = rep.chain_rms <= tol
    report(f"criterion 06 {'PASS' if ok else 'FAIL'}  "
           f"chain residual RMS {rep.chain_rms:.2e} <= {tol:.3f}")
    assert ok


def test_criterion_07_change_of_measure_triangle(report):
    grid = make_grid(1.0, 200)
    n = 20_000
    allowance = math.sqrt(grid.dt)
    lines, ok = [], True
    for builder, tag in ((mean_field_ou, "linear"), (sign_drift, "irregular")):
        spec = builder()
        solved = picard_solve(spec, 1.0, grid, n, PIN)
        direct = direct_particle_solve(spec, 1.0, grid, n, PIN)
        paths = sample_brownian(grid, n, 1.0, PIN)
        for payoff, pname in ((lambda y: y, "id"),
                              (lambda y: np.maximum(y, 0.0), "call")):
            rw = reweighted_expectation(spec, solved.frozen_flow, paths,
                                        payoff)
            wm, wse = rw.extra["weight_mean"], rw.extra["weight_mean_se"]
            ok = ok and abs(wm - 1.0) <= 3 * wse
            ests = [rw.estimate,
                    *(mean_and_se(payoff(r.ensemble.terminal()))[0]
                      for r in (solved, direct))]
            ses = [rw.stderr,
                   *(mean_and_se(payoff(r.ensemble.terminal()))[1]
                     for r in (solved, direct))]
            slack = math.inf
            for i in range(3):
                for j in range(i + 1, 3):
                    gap = abs(ests[i] - ests[j])
                    tol = 3 * (ses[i] + ses[j]) + allowance
                    slack = min(slack, tol - gap)
                    ok = ok and gap <= tol
            lines.append(f"{tag}/{pname} min slack {slack:.4f}")
    report(f"criterion 07 {'PASS' if ok else 'FAIL'}  "
           f"pairwise triangle with sqrt(dt) allowance; " + "; ".join(lines))
    assert ok


def test_criterion_08_fixed_point_uniqueness_probe(report):
    grid = make_grid(1.0, 100)
    worst = 0.0
    for builder in ALL_MODELS:
        spec = builder()
        ra = picard_solve(spec, 1.0, grid, 20_000, PIN,
                          PicardConfig(tolerance=1e-3,
                                       initial_flow="brownian"))
        rb = picard_solve(spec, 1.0, grid, 20_000, PIN,
                          PicardConfig(tolerance=1e-3, initial_flow="dirac"))
        worst = max(worst, flow_distance(ra.flow, rb.flow))
    ok = worst <= 2e-3
    report(f"criterion 08 {'PASS' if ok else 'FAIL'}  "
           f"sup-Kantorovich gap between initial-flow choices "
           f"{worst:.2e} <= 2e-3 across {len(ALL_MODELS)} models")
    assert ok


def test_criterion_09_mollified_drift_convergence(report):
    grid = make_grid(1.0, 200)
    study = mollified_convergence_study(sign_drift(), 0.1, grid, 100_000,
                                        PIN, levels=(4, 16, 64, 256))
    gaps = ", ".join(f"{g:.2e}" for g in study.mean_square_gap)
    ok = study.monotone_within_noise
    report(f"criterion 09 {'PASS' if ok else 'FAIL'}  "
           f"mean-square gaps [{gaps}] nonincreasing within noise")
    assert ok


def test_criterion_10_determinism_and_clt_rate(tmp_path, report):
    payload = {
        "model": {"name": "ou", "theta": 1.0, "kappa": 0.5},
        "run": {"start": 1.0, "horizon": 1.0, "steps": 100,
                "particles": 20_000, "seed": 20_260_816},
    }
    names = ("simulate_nodes.csv", "simulate_summary.csv",
             "simulate_residuals.csv")
    blobs = []
    for workers in ("1", "2", "4"):
        out = tmp_path / f"w{workers}"
        payload["output"] = {"directory": str(out)}
        cfg = tmp_path / f"cfg{workers}.json"
        cfg.write_text(json.dumps(payload), encoding="utf-8")
        assert cli_main(["simulate", "--config", str(cfg),
                         "--workers", workers]) == 0
        blobs.append([(out / n).read_bytes() for n in names])
    identical = blobs[0] == blobs[1] == blobs[2]

    ses, ns = [], (1000, 2000, 4000, 8000, 16000)
    grid = make_grid(1.0, 50)
    for n in ns:
        r = picard_solve(mean_field_ou(), 1.0, grid, n, PIN)
        ses.append(mean_and_se(r.ensemble.terminal())[1])
    slope = float(np.polyfit(np.log(ns), np.log(ses), 1)[0])
    ok = identical and -0.6 <= slope <= -0.4
    report(f"criterion 10 {'PASS' if ok else 'FAIL'}  "
           f"CSV bytes identical across workers (1,2,4): {identical}; "
           f"SE slope {slope:.3f} in [-0.6, -0.4]")
    assert identical
    assert -0.6 <= slope <= -0.4
