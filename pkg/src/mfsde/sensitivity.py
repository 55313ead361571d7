"""Sensitivity of E[payoff(X_T^x)] to the initial point x.

Three estimators of the same delta:

* bel_delta: integration-by-parts (Bismut-Elworthy-Li) weight. The delta is
  E[ payoff(X_T) int_0^T ( a(s) dX_s/dx + dxb(s, X_s) A(s) ) dW_s ] for any
  bounded a with integral one (A is its running integral), where dxb is the
  derivative of the drift in the initial point through the law argument.
  The integrand is adapted, so a plain Ito sum against the increments of the
  driving Brownian motion does the job. No derivative of the payoff and no
  derivative of the drift in the state variable are needed; the first
  variation comes from the local-time machinery. Everything is evaluated
  along the driving Brownian ensemble and transported by the Girsanov
  weights of the same run; in that representation the driving increments of
  the solution are dB_k - b dt.

* pathwise_delta: E[ payoff'(X_T) dX_T/dx ] for differentiable payoffs.

* finite_difference_delta: central difference of two full solves at x +/- h
  under common random numbers; the blunt baseline the other two must match.

The delta is x-almost-everywhere well defined; at an exceptional null set of
initial points (e.g. a payoff kink sitting exactly on an atom of the law)
the reported value is the version picked by the discretization.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .drift import DriftSpec, mollify
from .girsanov import EstimatorResult, drift_along_paths
from .grid import SeedSpec, TimeGrid
from .localtime import _cumulative_pieces
from .measures import kantorovich
from .numerics import guarded_exp, mean_and_se
from .solver import PicardConfig, SolveResult, picard_solve


# ---------------------------------------------------------------------------
# weight functions a(s) with integral one
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WeightFunctionA:
    """Bounded weight a on [0, T] with int_0^T a = 1 and exact running
    integral A(t); the delta must not depend on the choice."""

    name: str
    horizon: float
    fn: Callable[[np.ndarray], np.ndarray]
    integral: Callable[[np.ndarray], np.ndarray]

    def validate(self, grid: TimeGrid, tol: float = 1e-10) -> None:
        """Reject weights whose grid quadrature misses integral one."""
        if grid.horizon != self.horizon:
            raise ValueError("weight horizon does not match the grid")
        total = float(np.trapezoid(self.fn(grid.nodes), grid.nodes))
        if abs(total - 1.0) > tol:
            raise ValueError(
                f"weight '{self.name}' integrates to {total!r}, not 1")
        if abs(float(self.integral(np.array([self.horizon]))[0]) - 1.0) > tol:
            raise ValueError(
                f"weight '{self.name}' running integral misses A(T) = 1")


def uniform_weight(horizon: float) -> WeightFunctionA:
    """a = 1/T; the flat default."""
    return WeightFunctionA(
        name="uniform", horizon=horizon,
        fn=lambda s: np.full_like(np.asarray(s, dtype=float), 1.0 / horizon),
        integral=lambda t: np.asarray(t, dtype=float) / horizon,
    )


def front_loaded_weight(horizon: float) -> WeightFunctionA:
    """a(s) = 2 (T - s) / T^2; puts its mass early on the horizon."""
    t_ = horizon
    return WeightFunctionA(
        name="front_loaded", horizon=t_,
        fn=lambda s: 2.0 * (t_ - np.asarray(s, dtype=float)) / (t_ * t_),
        integral=lambda t: np.asarray(t, dtype=float)
        * (2.0 * t_ - np.asarray(t, dtype=float)) / (t_ * t_),
    )


# ---------------------------------------------------------------------------
# payoffs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Payoff:
    """Terminal functional with optional derivative and a growth tag.

    growth_power p declares membership in the weighted space of functions
    with |payoff|^(2p) integrable against exp(-|y|^2 / (4T)); verify_growth
    spot-checks the tag by quadrature on a wide interval.
    """

    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    derivative: Optional[Callable[[np.ndarray], np.ndarray]] = None
    growth_power: float = 1.0

    def verify_growth(self, horizon: float, half_width: float = 60.0,
                      points: int = 20001) -> bool:
        """True when |payoff|^(2p) exp(-y^2/4T) decays by the boundary."""
        y = np.linspace(-half_width, half_width, points)
        # overflow is one of the failure modes being probed, not an error
        with np.errstate(over="ignore", invalid="ignore"):
            vals = np.abs(np.asarray(self.fn(y), dtype=float)) \
                ** (2 * self.growth_power)
            weighted = vals * np.exp(-y * y / (4.0 * horizon))
        if not np.isfinite(weighted).all():
            return False
        peak = float(weighted.max())
        edge = max(float(weighted[0]), float(weighted[-1]))
        return peak == 0.0 or edge <= 1e-8 * max(peak, 1.0)


def identity_payoff() -> Payoff:
    return Payoff("identity", fn=lambda y: y,
                  derivative=lambda y: np.ones_like(y))


def square_payoff() -> Payoff:
    return Payoff("square", fn=lambda y: y * y, derivative=lambda y: 2.0 * y)


def call_payoff(strike: float = 0.0) -> Payoff:
    """max(y - strike, 0); derivative is the a.e. version (indicator)."""
    return Payoff(
        f"call({strike:g})", fn=lambda y: np.maximum(y - strike, 0.0),
        derivative=lambda y: (y > strike).astype(float),
    )


def constant_payoff(value: float = 1.0) -> Payoff:
    return Payoff(f"constant({value:g})",
                  fn=lambda y: np.full_like(np.asarray(y, dtype=float), value),
                  derivative=lambda y: np.zeros_like(y), growth_power=1.0)


# ---------------------------------------------------------------------------
# derivative of the drift through the law argument
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LawDerivativeEvaluator:
    """Evaluator of d/dx b(s, y, law of X_s^x); callable as (s, y).

    Bump-estimated instances hold the two common-random-number law flows at
    x +/- h and re-evaluate the drift at the queried y, snapping s to the
    nearest grid node. Analytic instances wrap a closed form.
    """

    provenance: str  # "bump" | "analytic"
    _call: Callable[[float, np.ndarray], np.ndarray] = field(compare=False)
    h: Optional[float] = None
    grid: Optional[TimeGrid] = None

    def __call__(self, s: float, y: np.ndarray) -> np.ndarray:
        return self._call(s, y)


def analytic_law_derivative(fn: Callable[[float, np.ndarray], np.ndarray]
                            ) -> LawDerivativeEvaluator:
    return LawDerivativeEvaluator(provenance="analytic", _call=fn)


def default_bump(start: float) -> float:
    """Bump size 1e-2 (1 + |x|); balances bias and flow-noise cancellation."""
    return 1e-2 * (1.0 + abs(start))


def law_derivative(spec: DriftSpec, start: float, grid: TimeGrid,
                   n_paths: int, seed: SeedSpec, h: Optional[float] = None,
                   config: PicardConfig = PicardConfig(),
                   workers: int = 1) -> LawDerivativeEvaluator:
    """Central difference of the drift through the law in the initial point.

    Runs picard_solve at x + h and x - h with the same seed, so both flows
    ride the same Brownian ensemble and the difference isolates the response
    of the law to the initial point:

        dxb(s, y) ~= ( b(s, y, law^+_s) - b(s, y, law^-_s) ) / (2 h).

    Drifts with no law dependence give exactly zero by cancellation.
    """
    h = default_bump(start) if h is None else float(h)
    if h <= 0:
        raise ValueError(f"bump must be positive, got {h}")
    plus = picard_solve(spec, start + h, grid, n_paths, seed, config,
                        workers=workers)
    minus = picard_solve(spec, start - h, grid, n_paths, seed, config,
                         workers=workers)
    flow_p, flow_m = plus.flow, minus.flow

    def call(s: float, y: np.ndarray) -> np.ndarray:
        k = grid.index_of(float(s))
        t_k = float(grid.nodes[k])
        y = np.asarray(y, dtype=float)
        return (spec.fn(t_k, y, flow_p[k]) - spec.fn(t_k, y, flow_m[k])) / (2 * h)

    return LawDerivativeEvaluator(provenance="bump", _call=call, h=h,
                                  grid=grid)


# ---------------------------------------------------------------------------
# delta estimators
# ---------------------------------------------------------------------------

def _bel_core(result: SolveResult, dxb: Optional[LawDerivativeEvaluator],
              payoff: Payoff, weight: WeightFunctionA
              ) -> tuple[np.ndarray, dict]:
    """Per-particle BEL samples on the Brownian representation."""
    spec = result.spec
    grid = result.brownian.grid
    dt = grid.dt
    v = result.brownian.values
    db = result.brownian.increments()

    fb = drift_along_paths(spec, result.flow, result.brownian)
    log_w = (np.einsum("ij,ij->i", fb[:, :-1], db)
             - 0.5 * dt * np.einsum("ij,ij->i", fb[:, :-1], fb[:, :-1]))
    w = guarded_exp(log_w)

    cf, cb, cc = _cumulative_pieces(fb, result.brownian)
    c = cf + cb + cc
    del cf, cb, cc

    # driving increments of the solution in this representation
    db_drive = db - fb[:, :-1] * dt
    del fb, db

    if dxb is None:
        dxb_vals = np.zeros((v.shape[0], grid.steps))
    else:
        dxb_vals = np.empty((v.shape[0], grid.steps))
        for j in range(grid.steps):
            dxb_vals[:, j] = dxb(float(grid.nodes[j]), v[:, j])

    exp_neg = guarded_exp(-c)
    exp_pos = guarded_exp(c[:, :-1])
    del c
    inner = np.zeros_like(exp_neg)
    np.cumsum(exp_pos * dxb_vals * dt, axis=1, out=inner[:, 1:])
    fv = exp_neg * (1.0 + inner)
    del exp_neg, exp_pos, inner

    a_vals = np.asarray(weight.fn(grid.nodes[:-1]), dtype=float)
    big_a = np.asarray(weight.integral(grid.nodes[:-1]), dtype=float)
    integrand = a_vals[None, :] * fv[:, :-1] + dxb_vals * big_a[None, :]
    ito = np.einsum("ij,ij->i", integrand, db_drive)

    samples = w * np.asarray(payoff.fn(v[:, -1]), dtype=float) * ito
    meta = {"weight_mean": float(w.mean()), "weight_name": weight.name}
    return samples, meta


def bel_delta(spec: DriftSpec, start: float, grid: TimeGrid, n_paths: int,
              seed: SeedSpec, payoff: Payoff,
              weight: Optional[WeightFunctionA] = None,
              dxb: Optional[LawDerivativeEvaluator] = None,
              law_bump: Optional[float] = None,
              config: PicardConfig = PicardConfig(),
              se_ceiling: Optional[float] = None,
              workers: int = 1) -> EstimatorResult:
    """Delta d/dx E[payoff(X_T^x)] via the integration-by-parts weight.

    Needs no payoff derivative. The law-derivative evaluator is bump
    estimated from two extra common-random-number solves unless an analytic
    one is supplied. `weight` defaults to the uniform a = 1/T; estimates
    must agree across admissible weights within statistical error.
    """
    weight = uniform_weight(grid.horizon) if weight is None else weight
    weight.validate(grid)
    result = picard_solve(spec, start, grid, n_paths, seed, config,
                          workers=workers)
    if dxb is None and spec.law_lipschitz_const != 0.0:
        dxb = law_derivative(spec, start, grid, n_paths, seed, h=law_bump,
                             config=config, workers=workers)
    samples, meta = _bel_core(result, dxb, payoff, weight)
    est, se = mean_and_se(samples)
    meta["payoff"] = payoff.name
    meta["dxb_provenance"] = dxb.provenance if dxb is not None else "none"
    if se_ceiling is not None and se > se_ceiling:
        meta["heavy_tail_flag"] = True
        warnings.warn(
            f"bel_delta standard error {se:.3e} exceeds ceiling "
            f"{se_ceiling:.3e}; weights may be heavy tailed", RuntimeWarning)
    return EstimatorResult(label=f"bel[{weight.name}]", estimate=est,
                           stderr=se, n_paths=n_paths, seed=seed, extra=meta)


def pathwise_delta(spec: DriftSpec, start: float, grid: TimeGrid,
                   n_paths: int, seed: SeedSpec, payoff: Payoff,
                   dxb: Optional[LawDerivativeEvaluator] = None,
                   law_bump: Optional[float] = None,
                   config: PicardConfig = PicardConfig(),
                   workers: int = 1) -> EstimatorResult:
    """Delta as E[payoff'(X_T) dX_T/dx] for differentiable payoffs.

    Uses the first-variation path on the Brownian representation and the
    Girsanov weights of the same run.
    """
    if payoff.derivative is None:
        raise ValueError(f"payoff '{payoff.name}' has no derivative")
    result = picard_solve(spec, start, grid, n_paths, seed, config,
                          workers=workers)
    if dxb is None and spec.law_lipschitz_const != 0.0:
        dxb = law_derivative(spec, start, grid, n_paths, seed, h=law_bump,
                             config=config, workers=workers)

    fb = drift_along_paths(spec, result.flow, result.brownian)
    db = result.brownian.increments()
    dt = grid.dt
    log_w = (np.einsum("ij,ij->i", fb[:, :-1], db)
             - 0.5 * dt * np.einsum("ij,ij->i", fb[:, :-1], fb[:, :-1]))
    w = guarded_exp(log_w)
    cfs = _cumulative_pieces(fb, result.brownian)
    c = cfs[0] + cfs[1] + cfs[2]
    del cfs, fb

    v = result.brownian.values
    exp_neg = guarded_exp(-c)
    if dxb is None:
        fv_t = exp_neg[:, -1]
    else:
        exp_pos = guarded_exp(c[:, :-1])
        dxb_vals = np.empty((v.shape[0], grid.steps))
        for j in range(grid.steps):
            dxb_vals[:, j] = dxb(float(grid.nodes[j]), v[:, j])
        inner = np.sum(exp_pos * dxb_vals * dt, axis=1)
        fv_t = exp_neg[:, -1] * (1.0 + inner)

    dphi = np.asarray(payoff.derivative(v[:, -1]), dtype=float)
    est, se = mean_and_se(w * dphi * fv_t)
    return EstimatorResult(
        label="pathwise", estimate=est, stderr=se, n_paths=n_paths,
        seed=seed,
        extra={"payoff": payoff.name,
               "dxb_provenance": dxb.provenance if dxb is not None else "none"},
    )


def finite_difference_delta(spec: DriftSpec, start: float, grid: TimeGrid,
                            n_paths: int, seed: SeedSpec, payoff: Payoff,
                            h: Optional[float] = None,
                            config: PicardConfig = PicardConfig(),
                            workers: int = 1) -> EstimatorResult:
    """Central difference of two solves at x +/- h, common random numbers."""
    h = default_bump(start) if h is None else float(h)
    if h <= 0:
        raise ValueError(f"bump must be positive, got {h}")
    plus = picard_solve(spec, start + h, grid, n_paths, seed, config,
                        workers=workers)
    minus = picard_solve(spec, start - h, grid, n_paths, seed, config,
                         workers=workers)
    diff = (np.asarray(payoff.fn(plus.ensemble.terminal()), dtype=float)
            - np.asarray(payoff.fn(minus.ensemble.terminal()), dtype=float))
    est, se = mean_and_se(diff / (2.0 * h))
    return EstimatorResult(
        label="finite_difference", estimate=est, stderr=se, n_paths=n_paths,
        seed=seed, extra={"payoff": payoff.name, "h": h},
    )


# ---------------------------------------------------------------------------
# mollified drift convergence study
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MollifyStudy:
    """Terminal-value convergence of mollified drifts toward the target."""

    levels: tuple[int, ...]
    mean_square_gap: tuple[float, ...]
    gap_stderr: tuple[float, ...]
    terminal_w1: tuple[float, ...]
    monotone_within_noise: bool
    rate_slope: float  # fitted slope of log sqrt(msd) vs log(1/n); report only


def mollified_convergence_study(spec: DriftSpec, start: float, grid: TimeGrid,
                                n_paths: int, seed: SeedSpec,
                                levels: Sequence[int] = (4, 16, 64, 256),
                                config: PicardConfig = PicardConfig(),
                                workers: int = 1) -> MollifyStudy:
    """Solve with the drift mollified at each bandwidth 1/n, same noise.

    Reports E|X_T^n - X_T|^2 with its standard error and the terminal W1
    distance per level, whether the mean-square gap is nonincreasing within
    Monte Carlo noise, and a fitted convergence slope (diagnostic only; the
    square-root law it is compared against is a bound, not an asymptote).
    """
    if len(levels) < 2 or any(n < 1 for n in levels):
        raise ValueError("levels must be at least two bandwidth parameters")
    base = picard_solve(spec, start, grid, n_paths, seed, config,
                        workers=workers)
    x_t = base.ensemble.terminal()
    msd, ses, w1s = [], [], []
    for n in levels:
        res = picard_solve(mollify(spec, int(n)), start, grid, n_paths, seed,
                           config, workers=workers)
        gap = (res.ensemble.terminal() - x_t) ** 2
        m, se = mean_and_se(gap)
        msd.append(m)
        ses.append(se)
        w1s.append(kantorovich(res.flow[grid.steps], base.flow[grid.steps]))
    monotone = all(
        msd[j + 1] <= msd[j] + 3.0 * (ses[j] + ses[j + 1])
        for j in range(len(levels) - 1)
    )
    dist = np.sqrt(np.maximum(msd, 1e-300))
    slope = float(np.polyfit(np.log(1.0 / np.asarray(levels, dtype=float)),
                             np.log(dist), 1)[0])
    return MollifyStudy(
        levels=tuple(int(n) for n in levels),
        mean_square_gap=tuple(msd), gap_stderr=tuple(ses),
        terminal_w1=tuple(w1s), monotone_within_noise=monotone,
        rate_slope=slope,
    )
