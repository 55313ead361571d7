"""Empirical measures on the real line and the Kantorovich (W1) metric.

Laws are represented by their atoms; the Kantorovich distance between two
empirical measures is the L1 distance between quantile functions. For equal
atom counts that is the mean absolute difference of the sorted samples, in
general it is the area between the two empirical CDFs. A measure flow is one
empirical measure per grid node, compared in the uniform (sup over nodes)
Kantorovich distance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .grid import PathEnsemble, TimeGrid


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Uniformly weighted atoms, stored sorted.

    Pass presorted=True only when the input is already sorted ascending;
    construction is then zero-copy.
    """

    atoms: np.ndarray
    presorted: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        atoms = np.asarray(self.atoms, dtype=float)
        if atoms.ndim != 1 or atoms.size == 0:
            raise ValueError("atoms must be a nonempty 1-d array")
        if not np.isfinite(atoms).all():
            raise ValueError("atoms must be finite")
        if not self.presorted:
            atoms = np.sort(atoms)
        atoms.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)

    @property
    def size(self) -> int:
        return self.atoms.size

    def mean(self) -> float:
        return float(self.atoms.mean())

    def abs_moment(self, p: float) -> float:
        """E |Z|^p under the empirical law."""
        if p <= 0:
            raise ValueError(f"moment order must be positive, got {p}")
        return float((np.abs(self.atoms) ** p).mean())

    def expect(self, fn) -> float:
        """Integral of fn against the measure (fn vectorized over atoms)."""
        return float(np.mean(fn(self.atoms)))


def dirac(x: float) -> EmpiricalMeasure:
    """Point mass at x."""
    return EmpiricalMeasure(np.array([float(x)]), presorted=True)


def empirical_from_column(ensemble: PathEnsemble, node: int) -> EmpiricalMeasure:
    """Empirical law of the ensemble at grid node k."""
    if not (0 <= node <= ensemble.grid.steps):
        raise ValueError(f"node {node} outside 0..{ensemble.grid.steps}")
    return EmpiricalMeasure(ensemble.values[:, node].copy())


def _w1_sorted(xs: np.ndarray, ys: np.ndarray) -> float:
    """W1 between uniform empirical measures given sorted atom arrays."""
    if xs.size == ys.size:
        return float(np.abs(xs - ys).mean())
    # unequal counts: integrate |F - G| over the merged support
    merged = np.concatenate([xs, ys])
    merged.sort(kind="mergesort")
    deltas = np.diff(merged)
    cdf_x = np.searchsorted(xs, merged[:-1], side="right") / xs.size
    cdf_y = np.searchsorted(ys, merged[:-1], side="right") / ys.size
    return float(np.sum(np.abs(cdf_x - cdf_y) * deltas))


def kantorovich(mu: EmpiricalMeasure, nu: EmpiricalMeasure) -> float:
    """Kantorovich (Wasserstein-1) distance between two empirical measures.

    Equals sup over 1-Lipschitz h of |integral of h d(mu - nu)|; in one
    dimension this is the L1 distance between quantile functions.
    """
    return _w1_sorted(mu.atoms, nu.atoms)


def kantorovich_weighted(xs: np.ndarray, wx: np.ndarray,
                         ys: np.ndarray, wy: np.ndarray) -> float:
    """W1 between weighted samples (weights need not be normalized)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    wx = np.asarray(wx, dtype=float)
    wy = np.asarray(wy, dtype=float)
    if np.any(wx < 0) or np.any(wy < 0):
        raise ValueError("weights must be nonnegative")
    ox = np.argsort(xs, kind="mergesort")
    oy = np.argsort(ys, kind="mergesort")
    xs, wx = xs[ox], wx[ox]
    ys, wy = ys[oy], wy[oy]
    merged = np.concatenate([xs, ys])
    merged.sort(kind="mergesort")
    cum_x = np.concatenate([[0.0], np.cumsum(wx)])
    cum_y = np.concatenate([[0.0], np.cumsum(wy)])
    cdf_x = cum_x[np.searchsorted(xs, merged[:-1], side="right")] / cum_x[-1]
    cdf_y = cum_y[np.searchsorted(ys, merged[:-1], side="right")] / cum_y[-1]
    return float(np.sum(np.abs(cdf_x - cdf_y) * np.diff(merged)))


@dataclass(frozen=True)
class MeasureFlow:
    """One empirical measure per grid node (a discrete measure flow)."""

    grid: TimeGrid
    slices: tuple

    def __post_init__(self) -> None:
        if len(self.slices) != self.grid.steps + 1:
            raise ValueError(
                f"flow needs {self.grid.steps + 1} slices, got {len(self.slices)}"
            )

    def __getitem__(self, node: int) -> EmpiricalMeasure:
        return self.slices[node]

    def __len__(self) -> int:
        return len(self.slices)

    @staticmethod
    def from_ensemble(ensemble: PathEnsemble) -> "MeasureFlow":
        """Empirical law of the ensemble at every node, sorted columnwise."""
        cols = np.sort(ensemble.values, axis=0)
        slices = tuple(
            EmpiricalMeasure(np.ascontiguousarray(cols[:, k]), presorted=True)
            for k in range(ensemble.grid.steps + 1)
        )
        return MeasureFlow(grid=ensemble.grid, slices=slices)

    @staticmethod
    def constant(grid: TimeGrid, mu: EmpiricalMeasure) -> "MeasureFlow":
        """Flow equal to mu at every node."""
        return MeasureFlow(grid=grid, slices=tuple([mu] * (grid.steps + 1)))

    @staticmethod
    def from_atom_lists(grid: TimeGrid,
                        atom_lists: Sequence[np.ndarray]) -> "MeasureFlow":
        """Flow from one atom array per node (e.g. a closed-form mean curve)."""
        slices = tuple(EmpiricalMeasure(np.asarray(a, dtype=float))
                       for a in atom_lists)
        return MeasureFlow(grid=grid, slices=slices)

    def means(self) -> np.ndarray:
        return np.array([mu.mean() for mu in self.slices])


def flow_distance(a: MeasureFlow, b: MeasureFlow) -> float:
    """Uniform Kantorovich distance: sup over nodes of W1 between slices."""
    if a.grid != b.grid:
        raise ValueError("flows live on different grids")
    worst = 0.0
    for mu, nu in zip(a.slices, b.slices):
        d = _w1_sorted(mu.atoms, nu.atoms)
        if d > worst:
            worst = d
    return worst


def mean_and_moment(mu: EmpiricalMeasure, p: float = 2.0) -> tuple[float, float]:
    """Sample mean and p-th absolute moment of the atoms."""
    return mu.mean(), mu.abs_moment(p)
