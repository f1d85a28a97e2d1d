"""Uniform cell-centered grids and the probability densities living on them."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class Grid1:
    n: int
    lo: float
    hi: float

    def __post_init__(self):
        if self.n < 2 or not self.hi > self.lo:
            raise ValueError(f"invalid 1D grid n={self.n} [{self.lo}, {self.hi}]")

    @property
    def h(self) -> float:
        return (self.hi - self.lo) / self.n

    @property
    def centers(self) -> np.ndarray:
        return self.lo + (np.arange(self.n) + 0.5) * self.h

    @property
    def faces(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n + 1)

    @classmethod
    def symmetric(cls, half_width: float, n: int) -> "Grid1":
        return cls(n, -half_width, half_width)


@dataclass(frozen=True)
class Grid2:
    nx: int
    ny: int
    lo: float = 0.0
    hi: float = 20.0

    def __post_init__(self):
        if self.nx < 8 or self.ny < 8:
            raise ValueError("Grid2 needs nx, ny >= 8")
        if not self.hi > self.lo:
            raise ValueError("Grid2 needs hi > lo")

    @property
    def hx(self) -> float:
        return (self.hi - self.lo) / self.nx

    @property
    def hy(self) -> float:
        return (self.hi - self.lo) / self.ny

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    @property
    def axis_grids(self) -> tuple[Grid1, Grid1]:
        return Grid1(self.nx, self.lo, self.hi), Grid1(self.ny, self.lo, self.hi)

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        gx, gy = self.axis_grids
        return np.meshgrid(gx.centers, gy.centers, indexing="ij")


@dataclass(frozen=True)
class DensityGrid1:
    grid: Grid1
    values: np.ndarray
    time: float = 0.0

    @property
    def y(self) -> np.ndarray:
        return self.grid.centers

    @property
    def mass(self) -> float:
        return float(np.sum(self.values) * self.grid.h)

    def normalized(self) -> "DensityGrid1":
        return replace(self, values=self.values / self.mass)

    def l1_distance(self, other: "DensityGrid1") -> float:
        if other.grid != self.grid:
            raise ValueError("L1 distance needs densities on the same grid")
        return float(np.sum(np.abs(self.values - other.values)) * self.grid.h)


@dataclass(frozen=True)
class DensityGrid2:
    grid: Grid2
    values: np.ndarray
    time: float = 0.0

    @property
    def mass(self) -> float:
        return float(np.sum(self.values) * self.grid.cell_area)

    def normalized(self) -> "DensityGrid2":
        return replace(self, values=self.values / self.mass)

    def l1_distance(self, other: "DensityGrid2") -> float:
        if other.grid != self.grid:
            raise ValueError("L1 distance needs densities on the same grid")
        return float(np.sum(np.abs(self.values - other.values)) * self.grid.cell_area)

    def coarsen(self, factor: int) -> "DensityGrid2":
        """Aggregate ``factor x factor`` blocks of cells (mass-conserving)."""
        g = self.grid
        if g.nx % factor or g.ny % factor:
            raise ValueError("coarsening factor must divide the grid size")
        v = self.values.reshape(g.nx // factor, factor, g.ny // factor, factor).mean(axis=(1, 3))
        return DensityGrid2(Grid2(g.nx // factor, g.ny // factor, g.lo, g.hi), v, self.time)


def gaussian_density2(grid: Grid2, center, sd: float) -> DensityGrid2:
    """Isotropic Gaussian sampled at cell centers, normalized on the grid."""
    x, y = grid.centers()
    v = np.exp(-((x - center[0]) ** 2 + (y - center[1]) ** 2) / (2.0 * sd * sd))
    d = DensityGrid2(grid, v)
    return d.normalized()


def local_maxima(values: np.ndarray, rel_threshold: float = 0.01) -> list[tuple[int, int]]:
    """Strict 8-neighbour interior maxima with value >= ``rel_threshold * max``."""
    v = np.asarray(values)
    core = v[1:-1, 1:-1]
    is_max = core >= rel_threshold * v.max()
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            nb = v[1 + di : v.shape[0] - 1 + di, 1 + dj : v.shape[1] - 1 + dj]
            is_max &= core > nb
    return [(int(i) + 1, int(j) + 1) for i, j in np.argwhere(is_max)]
