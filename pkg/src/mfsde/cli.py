"""Command-line front end: simulate, delta, convergence, selfcheck.

The config is a single JSON file with nested sections (schema in the
README); parsing is strict, so unknown sections or keys are errors rather
than silent no-ops. Results land in an output directory as CSV files with
fixed column sets, full-precision floats, UTF-8 and LF line endings. For a
fixed config and seed the CSV bytes are identical across runs and worker
counts; volatile run facts (wall time, package version) go to meta.json.

Exit codes: 0 success, 2 malformed config or usage error, 3 numerical
failure (non-convergence, blow-up, overflow guard), 4 self-check failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np

from .drift import (DriftSpec, constant_drift, convolution_drift,
                    expectation_drift, mean_field_ou, sign_drift, zero_drift)
from .girsanov import EstimatorResult, doleans_weights
from .grid import SeedSpec, TimeGrid, make_grid, sample_brownian
from .localtime import drift_cumulants, local_time_integral, malliavin_derivative
from .numerics import ExponentOverflowError, mean_and_se
from .sensitivity import (Payoff, WeightFunctionA, bel_delta, call_payoff,
                          constant_payoff, finite_difference_delta,
                          front_loaded_weight, identity_payoff,
                          mollified_convergence_study, pathwise_delta,
                          square_payoff, uniform_weight)
from .solver import (BlowUpError, PicardConfig, PicardConvergenceError,
                     direct_particle_solve, moment_diagnostics, picard_solve)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_SELFCHECK = 4

MAX_PARTICLES = 10_000_000
MAX_STEPS = 100_000


class ConfigError(ValueError):
    """Malformed, incomplete or over-specified configuration."""


# ---------------------------------------------------------------------------
# config schema and strict parsing
# ---------------------------------------------------------------------------

_MODEL_KEYS = {
    "zero": set(),
    "constant": {"value"},
    "ou": {"theta", "kappa"},
    "convolution": set(),
    "sign": {"alpha", "theta", "kappa"},
    "expectation_square": {"theta", "kappa"},
}

_SCHEMA: dict[str, set[str]] = {
    "model": {"name", "value", "theta", "kappa", "alpha"},
    "run": {"start", "horizon", "steps", "particles", "seed", "method"},
    "picard": {"tolerance", "max_iterations", "initial_flow"},
    "delta": {"payoff", "strike", "weight", "methods", "fd_bump", "law_bump"},
    "convergence": {"studies", "particle_counts", "step_counts",
                    "mollify_levels", "rate_paths"},
    "output": {"directory"},
}

_PAYOFFS: dict[str, Callable[..., Payoff]] = {
    "identity": lambda strike: identity_payoff(),
    "square": lambda strike: square_payoff(),
    "call": lambda strike: call_payoff(strike),
    "constant": lambda strike: constant_payoff(1.0),
}

_WEIGHTS: dict[str, Callable[[float], WeightFunctionA]] = {
    "uniform": uniform_weight,
    "front_loaded": front_loaded_weight,
}


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigError(msg)


def _check_keys(section: str, entries: dict) -> None:
    _require(isinstance(entries, dict), f"section '{section}' must be an object")
    unknown = set(entries) - _SCHEMA[section]
    _require(not unknown,
             f"unknown key(s) in '{section}': {', '.join(sorted(unknown))}")


def _as_number(section: str, entries: dict, key: str, default=None,
               lo=None, hi=None, integer=False):
    if key not in entries:
        _require(default is not None, f"'{section}.{key}' is required")
        return default
    v = entries[key]
    ok = isinstance(v, int) and not isinstance(v, bool) if integer \
        else isinstance(v, (int, float)) and not isinstance(v, bool)
    _require(ok, f"'{section}.{key}' must be {'an integer' if integer else 'a number'}")
    v = int(v) if integer else float(v)
    _require(lo is None or v >= lo, f"'{section}.{key}' must be >= {lo}")
    _require(hi is None or v <= hi, f"'{section}.{key}' must be <= {hi}")
    _require(not isinstance(v, float) or math.isfinite(v),
             f"'{section}.{key}' must be finite")
    return v


@dataclass(frozen=True)
class RunConfig:
    """Validated, effective configuration of one CLI run.

    Carries everything needed to reproduce the run; `raw` is the canonical
    nested dict the hash and the re-serialization are computed from.
    """

    model_name: str
    model_params: dict
    start: float
    horizon: float
    steps: int
    particles: int
    seed: int
    method: str
    picard: PicardConfig
    payoff_name: str
    strike: float
    weight_name: str
    methods: tuple[str, ...]
    fd_bump: Optional[float]
    law_bump: Optional[float]
    studies: tuple[str, ...]
    particle_counts: tuple[int, ...]
    step_counts: tuple[int, ...]
    mollify_levels: tuple[int, ...]
    rate_paths: int
    out_dir: str
    raw: dict = field(compare=False)

    def grid(self) -> TimeGrid:
        return make_grid(self.horizon, self.steps)

    def seed_spec(self) -> SeedSpec:
        return SeedSpec(self.seed)

    def build_drift(self) -> DriftSpec:
        p = self.model_params
        if self.model_name == "zero":
            return zero_drift()
        if self.model_name == "constant":
            return constant_drift(p.get("value", 1.0))
        if self.model_name == "ou":
            return mean_field_ou(p.get("theta", 1.0), p.get("kappa", 0.5))
        if self.model_name == "convolution":
            return convolution_drift()
        if self.model_name == "sign":
            return sign_drift(p.get("alpha", 0.5), p.get("theta", 1.0),
                              p.get("kappa", 0.5))
        if self.model_name == "expectation_square":
            theta = p.get("theta", 1.0)
            kappa = p.get("kappa", 0.25)
            return expectation_drift(
                bbar=lambda t, y, v: -theta * y + kappa * v,
                functional=lambda z: z * z,
                growth_const=max(theta, 20.0 * kappa),
                law_lipschitz_const=20.0 * kappa,
                name="expectation_square",
                dbbar_dy=lambda t, y, v: np.full_like(y, -theta),
            )
        raise ConfigError(f"unknown model '{self.model_name}'")

    def build_payoff(self) -> Payoff:
        return _PAYOFFS[self.payoff_name](self.strike)

    def build_weight(self) -> WeightFunctionA:
        return _WEIGHTS[self.weight_name](self.horizon)

    def config_hash(self) -> str:
        # identifies the scientific configuration: the output location is
        # an execution detail and must not change the hash
        hashed = {k: v for k, v in self.raw.items() if k != "output"}
        return hashlib.sha256(
            serialize_config(hashed).encode("utf-8")).hexdigest()[:16]


def parse_config(payload: dict, seed_override: Optional[int] = None,
                 out_override: Optional[str] = None) -> RunConfig:
    """Validate the nested config dict strictly and apply CLI overrides."""
    _require(isinstance(payload, dict), "top-level config must be an object")
    unknown = set(payload) - set(_SCHEMA)
    _require(not unknown,
             f"unknown section(s): {', '.join(sorted(unknown))}")
    for section, entries in payload.items():
        _check_keys(section, entries)

    model = payload.get("model", {})
    name = model.get("name", "zero")
    _require(isinstance(name, str) and name in _MODEL_KEYS,
             f"'model.name' must be one of {sorted(_MODEL_KEYS)}")
    params = {k: v for k, v in model.items() if k != "name"}
    extra = set(params) - _MODEL_KEYS[name]
    _require(not extra,
             f"model '{name}' does not take: {', '.join(sorted(extra))}")
    for k in params:
        _as_number("model", params, k)

    run = payload.get("run", {})
    start = _as_number("run", run, "start", default=0.0)
    horizon = _as_number("run", run, "horizon", default=1.0, lo=1e-9)
    steps = _as_number("run", run, "steps", default=100, lo=1,
                       hi=MAX_STEPS, integer=True)
    particles = _as_number("run", run, "particles", default=10_000, lo=2,
                           hi=MAX_PARTICLES, integer=True)
    seed = _as_number("run", run, "seed", default=0, lo=0, hi=2**64 - 1,
                      integer=True)
    method = run.get("method", "picard")
    _require(method in ("picard", "direct"),
             "'run.method' must be 'picard' or 'direct'")

    pc = payload.get("picard", {})
    tol = _as_number("picard", pc, "tolerance", default=1e-3, lo=1e-12)
    max_it = _as_number("picard", pc, "max_iterations", default=50, lo=1,
                        hi=10_000, integer=True)
    init = pc.get("initial_flow", "brownian")
    _require(init in ("brownian", "dirac"),
             "'picard.initial_flow' must be 'brownian' or 'dirac'")

    dl = payload.get("delta", {})
    payoff_name = dl.get("payoff", "identity")
    _require(payoff_name in _PAYOFFS,
             f"'delta.payoff' must be one of {sorted(_PAYOFFS)}")
    strike = _as_number("delta", dl, "strike", default=0.0)
    weight_name = dl.get("weight", "uniform")
    _require(weight_name in _WEIGHTS,
             f"'delta.weight' must be one of {sorted(_WEIGHTS)}")
    methods = dl.get("methods", ["bel", "pathwise", "finite_difference"])
    _require(isinstance(methods, list) and methods
             and all(m in ("bel", "pathwise", "finite_difference")
                     for m in methods),
             "'delta.methods' must list bel, pathwise, finite_difference")
    fd_bump = dl.get("fd_bump")
    law_bump = dl.get("law_bump")
    for label, v in (("fd_bump", fd_bump), ("law_bump", law_bump)):
        _require(v is None or (isinstance(v, (int, float)) and 0 < v < 1),
                 f"'delta.{label}' must be in (0, 1) when given")

    cv = payload.get("convergence", {})
    studies = cv.get("studies", ["se_vs_n", "localtime_rate", "mollify"])
    _require(isinstance(studies, list) and studies
             and all(s in ("se_vs_n", "localtime_rate", "mollify")
                     for s in studies),
             "'convergence.studies' must list se_vs_n, localtime_rate, mollify")
    def _int_list(key, default, lo=1, hi=MAX_PARTICLES):
        vals = cv.get(key, default)
        _require(isinstance(vals, list) and len(vals) >= 2
                 and all(isinstance(v, int) and not isinstance(v, bool)
                         and lo <= v <= hi for v in vals),
                 f"'convergence.{key}' must be a list of >= 2 integers in "
                 f"[{lo}, {hi}]")
        return tuple(vals)
    particle_counts = _int_list("particle_counts",
                                [1000, 2000, 4000, 8000, 16000])
    step_counts = _int_list("step_counts", [100, 200, 400, 800], hi=MAX_STEPS)
    mollify_levels = _int_list("mollify_levels", [4, 16, 64, 256], hi=100_000)
    rate_paths = _as_number("convergence", cv, "rate_paths", default=1000,
                            lo=2, hi=MAX_PARTICLES, integer=True)

    out = payload.get("output", {})
    out_dir = out.get("directory", "out")
    _require(isinstance(out_dir, str) and out_dir, "'output.directory' must be a path")

    if seed_override is not None:
        seed = seed_override
    if out_override is not None:
        out_dir = out_override

    raw = {
        "model": {"name": name, **params},
        "run": {"start": start, "horizon": horizon, "steps": steps,
                "particles": particles, "seed": seed, "method": method},
        "picard": {"tolerance": tol, "max_iterations": max_it,
                   "initial_flow": init},
        "delta": {"payoff": payoff_name, "strike": strike,
                  "weight": weight_name, "methods": list(methods),
                  "fd_bump": fd_bump, "law_bump": law_bump},
        "convergence": {"studies": list(studies),
                        "particle_counts": list(particle_counts),
                        "step_counts": list(step_counts),
                        "mollify_levels": list(mollify_levels),
                        "rate_paths": rate_paths},
        "output": {"directory": out_dir},
    }
    return RunConfig(
        model_name=name, model_params=params, start=start, horizon=horizon,
        steps=steps, particles=particles, seed=seed, method=method,
        picard=PicardConfig(tolerance=tol, max_iterations=max_it,
                            initial_flow=init),
        payoff_name=payoff_name, strike=strike, weight_name=weight_name,
        methods=tuple(methods), fd_bump=fd_bump, law_bump=law_bump,
        studies=tuple(studies), particle_counts=particle_counts,
        step_counts=step_counts, mollify_levels=mollify_levels,
        rate_paths=rate_paths, out_dir=out_dir, raw=raw,
    )


def load_config(path: str, seed_override: Optional[int] = None,
                out_override: Optional[str] = None) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config '{path}': {exc}") from exc
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config '{path}' is not valid JSON: {exc}") from exc
    return parse_config(payload, seed_override, out_override)


def serialize_config(raw: dict) -> str:
    """Canonical JSON text; parse(serialize(parse(x))) == parse(x)."""
    return json.dumps(raw, sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------------------
# result tables and CSV output
# ---------------------------------------------------------------------------

def _fmt(x: Any) -> str:
    if isinstance(x, float):
        return repr(float(x))
    return str(x)


def write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    """Fixed columns, full-precision floats, UTF-8, LF; deterministic."""
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


@dataclass
class ResultTable:
    """Rows of (quantity, estimate, stderr, n, steps) plus run provenance.

    Wall time is tracked here for the run log but written to meta.json, not
    to the CSV, so output bytes stay reproducible.
    """

    seed: int
    config_hash: str
    rows: list = field(default_factory=list)
    wall_time: float = 0.0

    def add(self, quantity: str, estimate: float, stderr: float, n: int,
            steps: int) -> None:
        self.rows.append([quantity, float(estimate), float(stderr),
                          int(n), int(steps), self.seed, self.config_hash])

    def write(self, path: Path) -> None:
        write_csv(path, ["quantity", "estimate", "stderr", "n_paths",
                         "steps", "seed", "config_hash"], self.rows)


def _write_meta(out: Path, command: str, cfg: RunConfig,
                wall: float) -> None:
    from . import __version__
    meta = {
        "command": command,
        "config": cfg.raw,
        "config_hash": cfg.config_hash(),
        "wall_time_seconds": wall,
        "version": __version__,
    }
    (out / "meta.json").write_text(
        json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_simulate(cfg: RunConfig, workers: int = 1) -> int:
    """Solve the configured model; write node stats, residuals, summary."""
    t0 = time.perf_counter()
    spec = cfg.build_drift()
    grid = cfg.grid()
    seed = cfg.seed_spec()
    if cfg.method == "picard":
        result = picard_solve(spec, cfg.start, grid, cfg.particles, seed,
                              cfg.picard, workers=workers)
    else:
        result = direct_particle_solve(spec, cfg.start, grid, cfg.particles,
                                       seed, workers=workers)
    values = result.ensemble.values
    qs = np.quantile(values, [0.05, 0.25, 0.5, 0.75, 0.95], axis=0)
    out = _outdir(cfg)

    node_rows = []
    for k in range(grid.steps + 1):
        node_rows.append([k, float(grid.nodes[k]),
                          float(values[:, k].mean()),
                          float(values[:, k].var(ddof=1)),
                          float(qs[0, k]), float(qs[1, k]), float(qs[2, k]),
                          float(qs[3, k]), float(qs[4, k])])
    write_csv(out / "simulate_nodes.csv",
              ["node", "time", "mean", "variance", "q05", "q25", "q50",
               "q75", "q95"], node_rows)

    write_csv(out / "simulate_residuals.csv", ["iteration", "residual"],
              [[i + 1, float(r)] for i, r in enumerate(result.residual_history)])

    table = ResultTable(seed=cfg.seed, config_hash=cfg.config_hash())
    xt = result.ensemble.terminal()
    m, se = mean_and_se(xt)
    table.add("terminal_mean", m, se, cfg.particles, cfg.steps)
    m2, se2 = mean_and_se(xt * xt)
    table.add("terminal_second_moment", m2, se2, cfg.particles, cfg.steps)
    report = moment_diagnostics(result)
    table.add("max_node_second_moment", report.max_moments[0], 0.0,
              cfg.particles, cfg.steps)
    table.add("envelope_ratio", report.envelope_ratio, 0.0, cfg.particles,
              cfg.steps)
    table.add("picard_iterations", float(result.iterations), 0.0,
              cfg.particles, cfg.steps)
    table.add("final_residual", result.residual, 0.0, cfg.particles,
              cfg.steps)
    table.write(out / "simulate_summary.csv")
    _write_meta(out, "simulate", cfg, time.perf_counter() - t0)
    print(f"simulate: terminal mean {m:.6f} (se {se:.2e}), "
          f"{result.iterations} iteration(s), wrote {out}/")
    return EXIT_OK


def _agreement_rows(results: dict[str, EstimatorResult],
                    fd_h: float) -> list[list]:
    rows = []
    names = list(results)
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            a, b = results[names[i]], results[names[j]]
            tol = 3.0 * (a.stderr + b.stderr)
            if "finite_difference" in (names[i], names[j]):
                tol += fd_h * fd_h
            diff = abs(a.estimate - b.estimate)
            rows.append([f"{names[i]}|{names[j]}", float(diff), float(tol),
                         int(diff <= tol)])
    return rows


def cmd_delta(cfg: RunConfig, workers: int = 1) -> int:
    """Estimate the delta by the configured methods; write agreement flags."""
    t0 = time.perf_counter()
    spec = cfg.build_drift()
    grid = cfg.grid()
    seed = cfg.seed_spec()
    payoff = cfg.build_payoff()
    weight = cfg.build_weight()
    results: dict[str, EstimatorResult] = {}
    for method in cfg.methods:
        if method == "bel":
            results[method] = bel_delta(
                spec, cfg.start, grid, cfg.particles, seed, payoff,
                weight=weight, law_bump=cfg.law_bump, config=cfg.picard,
                workers=workers)
        elif method == "pathwise":
            if payoff.derivative is None:
                continue
            results[method] = pathwise_delta(
                spec, cfg.start, grid, cfg.particles, seed, payoff,
                law_bump=cfg.law_bump, config=cfg.picard, workers=workers)
        else:
            results[method] = finite_difference_delta(
                spec, cfg.start, grid, cfg.particles, seed, payoff,
                h=cfg.fd_bump, config=cfg.picard, workers=workers)

    out = _outdir(cfg)
    table = ResultTable(seed=cfg.seed, config_hash=cfg.config_hash())
    for name, r in results.items():
        table.add(f"delta_{name}", r.estimate, r.stderr, cfg.particles,
                  cfg.steps)
    table.write(out / "delta_results.csv")
    from .sensitivity import default_bump
    fd_h = cfg.fd_bump if cfg.fd_bump is not None else default_bump(cfg.start)
    write_csv(out / "delta_agreement.csv",
              ["pair", "abs_diff", "tolerance", "agree"],
              _agreement_rows(results, fd_h))
    _write_meta(out, "delta", cfg, time.perf_counter() - t0)
    for name, r in results.items():
        print(f"delta[{name}]: {r.estimate:.6f} (se {r.stderr:.2e})")
    print(f"wrote {out}/")
    return EXIT_OK


def se_rate_study(cfg: RunConfig, workers: int = 1
                  ) -> tuple[list[list], float]:
    """Standard error of the terminal mean vs particle count (log-log)."""
    spec = cfg.build_drift()
    grid = cfg.grid()
    seed = cfg.seed_spec()
    rows = []
    for n in cfg.particle_counts:
        result = picard_solve(spec, cfg.start, grid, n, seed, cfg.picard,
                              workers=workers)
        _, se = mean_and_se(result.ensemble.terminal())
        rows.append([n, float(se)])
    ns = np.array([r[0] for r in rows], dtype=float)
    ses = np.array([r[1] for r in rows], dtype=float)
    slope = float(np.polyfit(np.log(ns), np.log(ses), 1)[0])
    return rows, slope


def localtime_rate_study(cfg: RunConfig, workers: int = 1
                         ) -> tuple[list[list], float]:
    """RMS error of the local-time integral of sin against its smooth
    oracle (minus the time integral of cos along the path) vs step count."""
    seed = cfg.seed_spec()
    rows = []
    for steps in cfg.step_counts:
        grid = make_grid(cfg.horizon, steps)
        paths = sample_brownian(grid, cfg.rate_paths, cfg.start, seed,
                                workers=workers)
        got = local_time_integral(lambda t, y: np.sin(y), paths, 0,
                                  steps).value
        # trapezoid in time of cos along each path
        cosv = np.cos(paths.values)
        oracle = -np.trapezoid(cosv, dx=grid.dt, axis=1)
        rms = float(np.sqrt(np.mean((got - oracle) ** 2)))
        rows.append([steps, grid.dt, rms])
    dts = np.array([r[1] for r in rows])
    errs = np.array([r[2] for r in rows])
    slope = float(np.polyfit(np.log(dts), np.log(errs), 1)[0])
    return rows, slope


def cmd_convergence(cfg: RunConfig, workers: int = 1) -> int:
    """Run the configured convergence studies; write tables and fits."""
    t0 = time.perf_counter()
    out = _outdir(cfg)
    fit_rows = []
    if "se_vs_n" in cfg.studies:
        rows, slope = se_rate_study(cfg, workers)
        write_csv(out / "convergence_se_vs_n.csv", ["n_paths", "stderr"],
                  rows)
        fit_rows.append(["se_vs_n", float(slope)])
        print(f"se_vs_n slope: {slope:.3f} (expect about -0.5)")
    if "localtime_rate" in cfg.studies:
        rows, slope = localtime_rate_study(cfg, workers)
        write_csv(out / "convergence_localtime.csv",
                  ["steps", "dt", "rms_error"], rows)
        fit_rows.append(["localtime_rate", float(slope)])
        print(f"localtime_rate slope: {slope:.3f} (expect about 0.5)")
    if "mollify" in cfg.studies:
        study = mollified_convergence_study(
            cfg.build_drift(), cfg.start, cfg.grid(), cfg.particles,
            cfg.seed_spec(), levels=cfg.mollify_levels, config=cfg.picard,
            workers=workers)
        write_csv(out / "convergence_mollify.csv",
                  ["level", "mean_square_gap", "gap_stderr", "terminal_w1"],
                  [[n, m, s, w] for n, m, s, w in
                   zip(study.levels, study.mean_square_gap,
                       study.gap_stderr, study.terminal_w1)])
        fit_rows.append(["mollify_rate", float(study.rate_slope)])
        print(f"mollify: monotone within noise: {study.monotone_within_noise}, "
              f"rate slope {study.rate_slope:.3f}")
    write_csv(out / "convergence_fits.csv", ["study", "slope"], fit_rows)
    _write_meta(out, "convergence", cfg, time.perf_counter() - t0)
    print(f"wrote {out}/")
    return EXIT_OK


def cmd_selfcheck(cfg: Optional[RunConfig], workers: int = 1) -> int:
    """Fast built-in battery; prints one PASS/FAIL line per check."""
    t0 = time.perf_counter()
    seed = SeedSpec(cfg.seed if cfg is not None else 2718281828)
    grid = make_grid(1.0, 50)
    n = 4000
    checks: list[tuple[str, float, float, bool]] = []

    def record(name: str, value: float, bound: float, ok: bool) -> None:
        checks.append((name, value, bound, ok))

    # zero drift reproduces the driving noise exactly
    res0 = picard_solve(zero_drift(), 1.0, grid, n, seed, workers=workers)
    gap = float(np.max(np.abs(res0.ensemble.values - res0.brownian.values)))
    record("zero_drift_identity", gap, 0.0, gap == 0.0)

    # terminal mean of the linear model within 4 standard errors
    res = picard_solve(mean_field_ou(), 1.0, grid, n, seed, workers=workers)
    m, se = mean_and_se(res.ensemble.terminal())
    err = abs(m - math.exp(-0.5))
    record("ou_terminal_mean", err, 4 * se, err <= 4 * se)

    # Girsanov weights average to one
    w = doleans_weights(mean_field_ou(), res.flow, res.brownian)
    wm, wse = w.mean_and_se()
    record("weight_mean_one", abs(wm - 1.0), 4 * wse, abs(wm - 1.0) <= 4 * wse)

    # Malliavin cocycle at float precision
    c = drift_cumulants(res)
    d_full = malliavin_derivative(res, 0, 50, cumulants=c)
    d_split = (malliavin_derivative(res, 0, 25, cumulants=c)
               * malliavin_derivative(res, 25, 50, cumulants=c))
    cgap = float(np.max(np.abs(d_full - d_split)))
    record("malliavin_cocycle", cgap, 1e-10, cgap <= 1e-10)

    # delta of the flat model is one
    r = bel_delta(zero_drift(), 1.0, grid, n, seed, identity_payoff(),
                  workers=workers)
    err = abs(r.estimate - 1.0)
    record("bel_flat_delta", err, 4 * r.stderr, err <= 4 * r.stderr)

    # generation is independent of the worker count
    a = sample_brownian(grid, n, 0.0, seed, workers=1)
    b = sample_brownian(grid, n, 0.0, seed, workers=2)
    same = bool(np.array_equal(a.values, b.values))
    record("worker_independence", 0.0 if same else 1.0, 0.0, same)

    failed = [c for c in checks if not c[3]]
    for name, value, bound, ok in checks:
        print(f"{'PASS' if ok else 'FAIL'} {name}: value {value:.3e} "
              f"(bound {bound:.3e})")
    if cfg is not None:
        out = _outdir(cfg)
        write_csv(out / "selfcheck.csv", ["check", "value", "bound", "pass"],
                  [[nm, float(v), float(bd), int(ok)]
                   for nm, v, bd, ok in checks])
        _write_meta(out, "selfcheck", cfg, time.perf_counter() - t0)
    print(f"selfcheck: {len(checks) - len(failed)}/{len(checks)} passed")
    return EXIT_OK if not failed else EXIT_SELFCHECK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mfsde",
        description="Mean-field SDE simulation and sensitivity engine",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, needs_config in (("simulate", True), ("delta", True),
                               ("convergence", True), ("selfcheck", False)):
        p = sub.add_parser(name)
        p.add_argument("--config", required=needs_config,
                       help="path to the JSON config file")
        p.add_argument("--seed", type=int, default=None,
                       help="override run.seed")
        p.add_argument("--workers", type=int, default=1,
                       help="thread cap for path generation (results do not "
                            "depend on it)")
        p.add_argument("--out", default=None,
                       help="override output.directory")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = None
        if args.config is not None:
            cfg = load_config(args.config, seed_override=args.seed,
                              out_override=args.out)
        if args.workers is not None and args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        if args.command == "simulate":
            return cmd_simulate(cfg, workers=args.workers)
        if args.command == "delta":
            return cmd_delta(cfg, workers=args.workers)
        if args.command == "convergence":
            return cmd_convergence(cfg, workers=args.workers)
        return cmd_selfcheck(cfg, workers=args.workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PicardConvergenceError, BlowUpError, ExponentOverflowError,
            FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
