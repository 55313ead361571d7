"""Uniform time grids, seeded Brownian ensembles and reproducible streams.

All Monte Carlo work in this package runs on a uniform grid over [0, T] and
consumes Brownian increments generated from counter-based (Philox) streams.
Streams are derived from a (seed, stream) pair and a fixed particle-block
partition, so a given SeedSpec always produces bit-identical ensembles, no
matter how many worker threads generate the blocks or in which order they
finish.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

# Particles are generated in fixed blocks of this size; the partition is part
# of the reproducibility contract (changing it changes the draws).
BLOCK_SIZE = 4096

# Counter offset between consecutive blocks, in Philox draws. Each block
# consumes far fewer draws than 2**80, so blocks can never overlap.
_BLOCK_COUNTER_STRIDE = 1 << 80


@dataclass(frozen=True)
class TimeGrid:
    """Uniform partition of [0, T] into `steps` intervals of width dt."""

    horizon: float
    steps: int
    nodes: np.ndarray = field(repr=False, compare=False, default=None)

    def __post_init__(self) -> None:
        if not (self.horizon > 0.0 and math.isfinite(self.horizon)):
            raise ValueError(f"horizon must be finite and positive, got {self.horizon}")
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        nodes = np.linspace(0.0, self.horizon, self.steps + 1)
        # exact endpoints, no float drift from repeated addition
        nodes[0] = 0.0
        nodes[-1] = self.horizon
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    def index_of(self, t: float) -> int:
        """Snap a time in [0, T] to the nearest node index."""
        if not (0.0 <= t <= self.horizon * (1.0 + 1e-12)):
            raise ValueError(f"time {t} outside [0, {self.horizon}]")
        return min(self.steps, int(round(t / self.dt)))


def make_grid(horizon: float, steps: int) -> TimeGrid:
    """Build the uniform grid with nodes t_k = k * T / steps."""
    return TimeGrid(horizon=horizon, steps=steps)


@dataclass(frozen=True)
class SeedSpec:
    """Master seed plus a stream index selecting an independent substream.

    The pair keys a 128-bit Philox counter-based generator. Block j of an
    ensemble draws from counter offset j * 2**80, which makes generation
    embarrassingly parallel and independent of scheduling.
    """

    seed: int
    stream: int = 0

    def __post_init__(self) -> None:
        if not (0 <= self.seed < 2**64):
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        if not (0 <= self.stream < 2**64):
            raise ValueError("stream must fit in an unsigned 64-bit integer")

    def child(self, offset: int) -> "SeedSpec":
        """Independent substream, e.g. for an auxiliary ensemble."""
        return SeedSpec(self.seed, self.stream + offset)

    def _key(self) -> int:
        return (self.stream << 64) | self.seed

    def block_generator(self, block_index: int) -> np.random.Generator:
        """Generator positioned at the counter offset of one particle block."""
        bitgen = np.random.Philox(key=self._key())
        bitgen.advance(block_index * _BLOCK_COUNTER_STRIDE)
        return np.random.Generator(bitgen)

    def scalar_rng(self) -> np.random.Generator:
        """Convenience generator for non-ensemble sampling (audits, tests)."""
        return np.random.Generator(np.random.Philox(key=self._key()))


@dataclass(frozen=True)
class PathEnsemble:
    """N discrete paths on a common grid, values shaped (N, steps + 1).

    `kind` records what the paths represent ("brownian" for x + B_t, or
    "solution" for an Euler scheme output); `start` is the common initial
    point x; `seed` is the stream that generated the driving noise. Values
    are read-only after construction.
    """

    grid: TimeGrid
    values: np.ndarray
    kind: str
    start: float
    seed: "SeedSpec | None" = None

    def __post_init__(self) -> None:
        if self.values.ndim != 2 or self.values.shape[1] != self.grid.steps + 1:
            raise ValueError(
                f"values must have shape (N, {self.grid.steps + 1}), "
                f"got {self.values.shape}"
            )
        if self.kind not in ("brownian", "solution"):
            raise ValueError(f"unknown ensemble kind '{self.kind}'")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("path values must be finite")
        self.values.setflags(write=False)

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]

    def increments(self) -> np.ndarray:
        """Per-step increments, shape (N, steps)."""
        return np.diff(self.values, axis=1)

    def terminal(self) -> np.ndarray:
        return self.values[:, -1]


def _normal_increments(grid: TimeGrid, n_paths: int, seed: SeedSpec,
                       workers: int = 1) -> np.ndarray:
    """Standard normal draws, shape (n_paths, steps), from fixed blocks."""
    steps = grid.steps
    out = np.empty((n_paths, steps))
    n_blocks = (n_paths + BLOCK_SIZE - 1) // BLOCK_SIZE

    def fill(j: int) -> None:
        lo = j * BLOCK_SIZE
        hi = min(lo + BLOCK_SIZE, n_paths)
        # always draw the full block shape so partial tail blocks do not
        # change the draws of a longer run sharing the same seed
        block = seed.block_generator(j).standard_normal((BLOCK_SIZE, steps))
        out[lo:hi] = block[: hi - lo]

    if workers > 1 and n_blocks > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fill, range(n_blocks)))
    else:
        for j in range(n_blocks):
            fill(j)
    return out


def sample_brownian(grid: TimeGrid, n_paths: int, start: float, seed: SeedSpec,
                    workers: int = 1) -> PathEnsemble:
    """Sample N Brownian paths started at x on the grid.

    Parameters
    ----------
    grid : time grid for the ensemble
    n_paths : number of paths N
    start : common initial value x
    seed : stream specification; same spec gives bit-identical output
    workers : thread cap for block generation; has no effect on the values

    Returns
    -------
    PathEnsemble of kind "brownian" with values[i, k] = x + B_{t_k}.
    """
    if n_paths < 1:
        raise ValueError(f"n_paths must be >= 1, got {n_paths}")
    dw = _normal_increments(grid, n_paths, seed, workers=workers)
    dw *= math.sqrt(grid.dt)
    values = np.empty((n_paths, grid.steps + 1))
    values[:, 0] = start
    np.cumsum(dw, axis=1, out=values[:, 1:])
    values[:, 1:] += start
    return PathEnsemble(grid=grid, values=values, kind="brownian",
                        start=start, seed=seed)
