"""Local-time-space integrals by time reversal, without differentiating f.

The integral of f against the local time of a Brownian path in time and
space decomposes into three discretizable pieces: a forward Ito sum, a
backward Ito sum along the time-reversed path (whose Brownian increments are
reconstructed from the reversed path and its known drift), and a correction
integral against that drift:

    int_s^t int f(u, y) L(du, dy)
        = int_s^t f(u, B_u^x) dB_u
        + int_{T-t}^{T-s} f(T-u, Bh_u^x) dW_u
        - int_{T-t}^{T-s} f(T-u, Bh_u^x) (Bh_u / (T-u)) du

with Bh_u = B_{T-u} the reversed (centered) path and W its Brownian part,
dW = dBh + (Bh_u / (T-u)) du. All three pieces use left-point sums; in
reversed time the left points stay at least one step away from u = T, so
the drift ratio never divides by zero.

For smooth f the integral equals minus the time integral of the space
derivative of f along the path, which is the validation oracle. Because the
sums are left-point, the integral is exactly additive over adjacent
intervals, which makes the Malliavin derivative

    D_s X_t = exp( - int_s^t int b(u, y, law_u) L(du, dy) )

an exact cocycle under the discretization. Quantities for the solution
process are evaluated along the driving Brownian ensemble and transported by
the Girsanov weights; the identification holds in law, which is what the
expectation-level estimators need.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .girsanov import drift_along_paths
from .grid import PathEnsemble
from .numerics import guarded_exp
from .solver import SolveResult

# f and law-derivative evaluators along paths: (time, states) -> values
SpaceTimeFn = Callable[[float, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class LocalTimeIntegralResult:
    """Per-particle local-time integral with its three bookkept pieces.

    value == forward + backward + correction holds exactly (same float
    additions, no hidden rebalancing).
    """

    value: np.ndarray
    forward: np.ndarray
    backward: np.ndarray
    correction: np.ndarray
    s_node: int
    t_node: int


def _node_values(f: SpaceTimeFn, paths: PathEnsemble) -> np.ndarray:
    """f(t_k, path value at k) for all nodes, shape (N, M+1)."""
    grid = paths.grid
    out = np.empty_like(paths.values)
    for k in range(grid.steps + 1):
        out[:, k] = f(float(grid.nodes[k]), paths.values[:, k])
    if not np.isfinite(out).all():
        raise FloatingPointError("integrand non-finite along paths")
    return out


def _cumulative_pieces(fvals: np.ndarray,
                       paths: PathEnsemble) -> tuple[np.ndarray, np.ndarray,
                                                     np.ndarray]:
    """Cumulative forward / backward / correction sums from node 0 to k.

    Returns three (N, M+1) arrays cf, cb, cc with the convention that the
    piece over [node i, node j] is c[:, j] - c[:, i]. Forward contributions
    sit at left points k in [i, j); backward and correction contributions
    map to original nodes k' in (i, j] (left points of the reversed
    interval), where t_{k'} >= dt keeps the reversal drift finite.
    """
    grid = paths.grid
    dt = grid.dt
    v = paths.values
    x = paths.start
    n = v.shape[0]

    db = np.diff(v, axis=1)
    cf = np.zeros_like(v)
    np.cumsum(fvals[:, :-1] * db, axis=1, out=cf[:, 1:])

    # reversal drift ratio Bh / (T - u) at original nodes 1..M
    ratio = (v[:, 1:] - x) / grid.nodes[1:]
    g_corr = -fvals[:, 1:] * ratio * dt
    # reversed-path increment at node k' is v[k'-1] - v[k'] = -db[k'-1]
    g_back = fvals[:, 1:] * (-db + ratio * dt)

    cb = np.zeros_like(v)
    np.cumsum(g_back, axis=1, out=cb[:, 1:])
    cc = np.zeros_like(v)
    np.cumsum(g_corr, axis=1, out=cc[:, 1:])
    return cf, cb, cc


def _check_nodes(paths: PathEnsemble, s: int, t: int) -> None:
    if not (0 <= s <= t <= paths.grid.steps):
        raise ValueError(
            f"need 0 <= s <= t <= {paths.grid.steps}, got s={s}, t={t}")


def local_time_integral(f: SpaceTimeFn, paths: PathEnsemble, s: int,
                        t: int) -> LocalTimeIntegralResult:
    """Integrate f against the path local time over [t_s, t_t], per particle.

    Parameters
    ----------
    f : space-time function, vectorized over states
    paths : Brownian ensemble (the decomposition is a Brownian identity)
    s, t : node indices with 0 <= s <= t <= steps

    Returns
    -------
    LocalTimeIntegralResult with value = forward + backward + correction.
    """
    if paths.kind != "brownian":
        raise ValueError("local-time integrals need a Brownian ensemble")
    _check_nodes(paths, s, t)
    fvals = _node_values(f, paths)
    cf, cb, cc = _cumulative_pieces(fvals, paths)
    forward = cf[:, t] - cf[:, s]
    backward = cb[:, t] - cb[:, s]
    correction = cc[:, t] - cc[:, s]
    return LocalTimeIntegralResult(
        value=forward + backward + correction, forward=forward,
        backward=backward, correction=correction, s_node=s, t_node=t,
    )


def drift_cumulants(result: SolveResult) -> np.ndarray:
    """Cumulative local-time integral of the drift along the driving paths.

    C[:, k] is the integral over [0, t_k] of b(u, y, flow_u) against the
    local time of the Brownian representation; differences of C give every
    subinterval, so the derived exponentials are exactly multiplicative.
    Heavy runs compute this once and pass it to the derivative routines.
    """
    fvals = drift_along_paths(result.spec, result.flow, result.brownian)
    cf, cb, cc = _cumulative_pieces(fvals, result.brownian)
    return cf + cb + cc


def malliavin_derivative(result: SolveResult, s: int, t: int,
                         cumulants: Optional[np.ndarray] = None) -> np.ndarray:
    """Per-particle Malliavin derivative D_s X_t along the Brownian paths.

    D_s X_t = exp( - int_s^t int b(u, y, flow_u) L(du, dy) ), evaluated on
    the driving ensemble; use the Girsanov weights of the same run when
    taking expectations against the solution law. Strictly positive by
    construction; exponents are guarded against overflow.
    """
    _check_nodes(result.brownian, s, t)
    c = drift_cumulants(result) if cumulants is None else cumulants
    return guarded_exp(-(c[:, t] - c[:, s]))


def first_variation(result: SolveResult,
                    dxb: Optional[SpaceTimeFn] = None,
                    cumulants: Optional[np.ndarray] = None) -> np.ndarray:
    """Per-particle first-variation path d/dx X_{t_k}, shape (N, M+1).

    Variation-of-constants form: the derivative of the flow map is the
    Malliavin factor from 0 plus the accumulated response to the derivative
    of the drift in the initial condition through the law,

        dX_t/dx = D_0 X_t + sum_{j < k} D_{t_j} X_{t_k} dxb(t_j, Y_j) dt,

    computed in O(M) per particle from shared cumulants. dxb is the
    law-derivative evaluator (None means no law feedback, in which case the
    first variation equals D_0 X_t exactly).
    """
    grid = result.brownian.grid
    c = drift_cumulants(result) if cumulants is None else cumulants
    exp_neg = guarded_exp(-c)
    if dxb is None:
        return exp_neg
    exp_pos = guarded_exp(c[:, :-1])
    v = result.brownian.values
    dxb_vals = np.empty((v.shape[0], grid.steps))
    for j in range(grid.steps):
        dxb_vals[:, j] = dxb(float(grid.nodes[j]), v[:, j])
    inner = np.zeros_like(c)
    np.cumsum(exp_pos * dxb_vals * grid.dt, axis=1, out=inner[:, 1:])
    return exp_neg * (1.0 + inner)


@dataclass(frozen=True)
class ChainIdentityReport:
    """Residuals of the derivative chain rule and the cocycle property."""

    s_node: int
    u_node: int
    t_node: int
    chain_rms: float
    chain_max: float
    cocycle_rms: float
    cocycle_max: float
    n_paths: int


def check_chain_identity(result: SolveResult, s: int, u: int, t: int,
                         dxb: Optional[SpaceTimeFn] = None
                         ) -> ChainIdentityReport:
    """Audit dX_t/dx = D_s X_t dX_s/dx + int_s^t D_r X_t dxb(r, Y_r) dr
    together with the cocycle D_s X_t = D_u X_t D_s X_u (s <= u <= t).

    Both identities hold exactly for the continuous objects; the report
    shows what is left of them after discretization (for the shared-cumulant
    scheme used here the residuals are at float roundoff level, which the
    closed-form oracles in the tests complement with genuine numerics).
    """
    if not (0 <= s <= u <= t <= result.brownian.grid.steps):
        raise ValueError(f"need 0 <= s <= u <= t, got ({s}, {u}, {t})")
    grid = result.brownian.grid
    c = drift_cumulants(result)
    fv = first_variation(result, dxb, cumulants=c)

    d_st = guarded_exp(-(c[:, t] - c[:, s]))
    d_ut = guarded_exp(-(c[:, t] - c[:, u]))
    d_su = guarded_exp(-(c[:, u] - c[:, s]))
    cocycle_res = d_st - d_ut * d_su

    integral = np.zeros(c.shape[0])
    if dxb is not None and t > s:
        v = result.brownian.values
        acc = np.zeros(c.shape[0])
        for j in range(s, t):
            d_jt = guarded_exp(-(c[:, t] - c[:, j]))
            acc = acc + d_jt * dxb(float(grid.nodes[j]), v[:, j]) * grid.dt
        integral = acc
    chain_res = fv[:, t] - (d_st * fv[:, s] + integral)

    return ChainIdentityReport(
        s_node=s, u_node=u, t_node=t,
        chain_rms=float(np.sqrt(np.mean(chain_res ** 2))),
        chain_max=float(np.max(np.abs(chain_res))),
        cocycle_rms=float(np.sqrt(np.mean(cocycle_res ** 2))),
        cocycle_max=float(np.max(np.abs(cocycle_res))),
        n_paths=c.shape[0],
    )
