"""Euler-Maruyama ensembles for the planar model and the reduced 1D diffusion.

Random numbers come from counter-style streams: the noise for a block of
paths at a given step (or for a whole first-passage block) is drawn from a
generator keyed by ``(seed, step, block)``. Results therefore do not depend
on how blocks are distributed over workers.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .errors import AllCensored, UnstableStep
from .grids import DensityGrid1, DensityGrid2, Grid1, Grid2

BLOCK = 4096


class TabulatedDrift:
    """Drift tabulated at the cell centers of a uniform grid, linearly interpolated.

    Outside the table the end values are held. Passing one of these to
    :func:`sample_first_passage` enables the compiled path loop.
    """

    def __init__(self, grid: Grid1, values):
        self.grid = grid
        self.values = np.ascontiguousarray(values, dtype=float)
        self._x = grid.centers

    def __call__(self, y):
        return np.interp(y, self._x, self.values)

    @classmethod
    def from_manifold(cls, manifold) -> "TabulatedDrift":
        return cls(manifold.grid, manifold.g_red)


def block_generator(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=tuple(key))))


@dataclass(frozen=True)
class EnsembleState2:
    particles: np.ndarray  # shape (n, 2)
    time: float = 0.0
    rng_seed: int = 0
    step_index: int = 0

    @classmethod
    def from_point(cls, point, n: int, seed: int = 0) -> "EnsembleState2":
        return cls(np.tile(np.asarray(point, float), (n, 1)), 0.0, seed)

    @classmethod
    def from_gaussian(cls, center, sd: float, n: int, bounds, seed: int = 0) -> "EnsembleState2":
        """Isotropic Gaussian cloud, resampled until every particle is inside the box."""
        rng = block_generator(seed, 2**31 - 1)
        lo, hi = bounds
        pts = np.empty((0, 2))
        while len(pts) < n:
            cand = rng.normal(center, sd, size=(n, 2))
            cand = cand[np.all((cand >= lo) & (cand <= hi), axis=1)]
            pts = np.vstack([pts, cand])
        return cls(pts[:n].copy(), 0.0, seed)


@dataclass(frozen=True)
class FirstPassageSample:
    exit_times: np.ndarray
    censored_count: int
    horizon: float

    @property
    def n_paths(self) -> int:
        return len(self.exit_times) + self.censored_count

    @property
    def censored_fraction(self) -> float:
        return self.censored_count / self.n_paths

    @property
    def mean(self) -> float:
        return float(np.mean(self.exit_times))

    @property
    def sd(self) -> float:
        return float(np.std(self.exit_times, ddof=1)) if len(self.exit_times) > 1 else 0.0

    @property
    def stderr(self) -> float:
        return self.sd / math.sqrt(len(self.exit_times)) if len(self.exit_times) else math.inf


def reflect_into(x: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Mirror positions at the walls until every one lies in ``[lo, hi]``."""
    x = np.array(x, dtype=float, copy=True)
    while True:
        below, above = x < lo, x > hi
        if not (below.any() or above.any()):
            return x
        x[below] = 2.0 * lo - x[below]
        x[above] = 2.0 * hi - x[above]


def _noise_2d(seed: int, step: int, n: int) -> np.ndarray:
    out = np.empty((n, 2))
    for b, start in enumerate(range(0, n, BLOCK)):
        stop = min(n, start + BLOCK)
        out[start:stop] = block_generator(seed, step, b).standard_normal((stop - start, 2))
    return out


def step_em_2d(state: EnsembleState2, field, beta: float, dt: float, bounds=None) -> EnsembleState2:
    """One Euler-Maruyama step with independent noise per component and reflection."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    lo, hi = bounds if bounds is not None else field.bounds
    p = state.particles
    f1, f2 = field(p[:, 0], p[:, 1])
    incr = np.column_stack([f1, f2]) * dt
    if beta > 0:
        incr += beta * math.sqrt(dt) * _noise_2d(state.rng_seed, state.step_index, len(p))
    if np.any(np.abs(incr) > math.sqrt(2.0) * (hi - lo)) or not np.all(np.isfinite(incr)):
        raise UnstableStep(f"step of size dt={dt} moved a particle across the domain")
    new = reflect_into(p + incr, lo, hi)
    return replace(state, particles=new, time=state.time + dt, step_index=state.step_index + 1)


def run_em_2d(state: EnsembleState2, field, beta: float, dt: float, n_steps: int, bounds=None,
              trajectory_path=None, stride: int = 0) -> EnsembleState2:
    """Advance ``n_steps``; optionally dump ``(path_id, t, nu1, nu2)`` every ``stride`` steps."""
    writer = fh = None
    if trajectory_path is not None and stride > 0:
        fh = open(trajectory_path, "w", newline="")
        writer = csv.writer(fh)
        writer.writerow(["path_id", "t", "nu1", "nu2"])

    def dump(s):
        for i, (a, b) in enumerate(s.particles):
            writer.writerow([i, f"{s.time:.6f}", f"{a:.10e}", f"{b:.10e}"])

    try:
        if writer:
            dump(state)
        for k in range(1, n_steps + 1):
            state = step_em_2d(state, field, beta, dt, bounds)
            if writer and k % stride == 0:
                dump(state)
    finally:
        if fh:
            fh.close()
    return state


def step_em_1d(y, g_red: Callable, beta: float, dt: float, bounds, rng: np.random.Generator | None = None):
    """Euler-Maruyama step of ``dy = g(y) dt + beta dW`` reflected into ``bounds``."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    lo, hi = bounds
    y = np.asarray(y, dtype=float)
    incr = np.asarray(g_red(y), dtype=float) * dt
    if beta > 0:
        if rng is None:
            raise ValueError("a random generator is needed when beta > 0")
        incr = incr + beta * math.sqrt(dt) * rng.standard_normal(y.shape)
    if np.any(np.abs(incr) > hi - lo) or not np.all(np.isfinite(incr)):
        raise UnstableStep(f"step of size dt={dt} moved a particle across the domain")
    return reflect_into(y + incr, lo, hi)


def histogram_density(particles, grid: Grid1 | Grid2) -> DensityGrid1 | DensityGrid2:
    """Cell-count density normalised to unit mass; edge values land in edge cells."""
    pts = np.asarray(particles, dtype=float)
    if len(pts) == 0:
        raise ValueError("histogram_density needs at least one particle")
    if isinstance(grid, Grid2):
        ix = np.clip(((pts[:, 0] - grid.lo) / grid.hx).astype(int), 0, grid.nx - 1)
        iy = np.clip(((pts[:, 1] - grid.lo) / grid.hy).astype(int), 0, grid.ny - 1)
        counts = np.bincount(ix * grid.ny + iy, minlength=grid.nx * grid.ny).reshape(grid.nx, grid.ny)
        return DensityGrid2(grid, counts / (len(pts) * grid.cell_area))
    ix = np.clip(((pts.ravel() - grid.lo) / grid.h).astype(int), 0, grid.n - 1)
    counts = np.bincount(ix, minlength=grid.n)
    return DensityGrid1(grid, counts / (len(pts) * grid.h))


def _passage_block_1d(seed, block, n, y0, g_red, beta, dt, n_steps, level, direction, bounds, bridge):
    rng = block_generator(seed, block)
    lo, hi = bounds
    # the wall behind the absorbing level reflects; the one beyond it is never reached
    wall_lo, wall_hi = (lo, math.inf) if direction > 0 else (-math.inf, hi)
    if isinstance(g_red, TabulatedDrift):
        from ._kernels import passage_times_tabulated

        wall = wall_lo if direction > 0 else wall_hi
        return passage_times_tabulated(rng, n, float(y0), g_red.grid.lo, g_red.grid.h, g_red.values, float(beta),
                                       float(dt), n_steps, float(level), float(direction), float(wall), bool(bridge))
    times = np.full(n, np.nan)
    idx = np.arange(n)
    y = np.full(n, float(y0))
    sq = beta * math.sqrt(dt)
    var = beta * beta * dt
    for k in range(1, n_steps + 1):
        if len(idx) == 0:
            break
        y_new = y + g_red(y) * dt + sq * rng.standard_normal(len(idx))
        y_new = reflect_into(y_new, wall_lo, wall_hi)
        hit = direction * (y_new - level) >= 0
        if bridge and beta > 0:
            gap_a = direction * (level - y)
            gap_b = np.where(hit, 0.0, direction * (level - y_new))
            u = rng.random(len(idx))
            hit |= u < np.exp(-2.0 * gap_a * gap_b / var)
        if hit.any():
            times[idx[hit]] = k * dt
            keep = ~hit
            idx, y_new = idx[keep], y_new[keep]
        y = y_new
    return times


def _passage_block_2d(seed, block, n, p0, field, beta, dt, n_steps, predicate, bounds):
    times = np.full(n, np.nan)
    idx = np.arange(n)
    p = np.tile(np.asarray(p0, float), (n, 1))
    lo, hi = bounds
    rng = block_generator(seed, block)
    sq = beta * math.sqrt(dt)
    for k in range(1, n_steps + 1):
        if len(idx) == 0:
            break
        f1, f2 = field(p[:, 0], p[:, 1])
        p = p + np.column_stack([f1, f2]) * dt + sq * rng.standard_normal((len(idx), 2))
        p = reflect_into(p, lo, hi)
        hit = np.asarray(predicate(p[:, 0], p[:, 1]), dtype=bool)
        if hit.any():
            times[idx[hit]] = k * dt
            idx, p = idx[~hit], p[~hit]
    return times


def sample_first_passage(initial, *, beta: float, dt: float = 1e-3, horizon: float = 1e3, n_paths: int = 10_000,
                         g_red: Callable | None = None, field=None, exit_at: float | None = None,
                         exit_predicate: Callable | None = None, bounds=None, seed: int = 0,
                         bridge: bool = True, workers: int = 1, block_size: int = BLOCK) -> FirstPassageSample:
    """Monte Carlo first-passage times.

    1D: give ``g_red`` and the absorbing level ``exit_at``; the process is
    reflected at the wall of ``bounds`` behind the start. With ``bridge`` the
    Brownian-bridge crossing probability between steps is included, removing
    the ``O(sqrt(dt))`` overshoot bias of discrete monitoring.

    2D: give ``field`` and ``exit_predicate(nu1, nu2) -> bool array``.
    """
    if n_paths < 1 or horizon <= 0:
        raise ValueError("need n_paths >= 1 and horizon > 0")
    n_steps = int(math.ceil(horizon / dt - 1e-9))
    sizes = [min(block_size, n_paths - s) for s in range(0, n_paths, block_size)]
    if g_red is not None:
        if exit_at is None:
            raise ValueError("1D first passage needs exit_at")
        y0 = float(initial)
        direction = 1.0 if exit_at >= y0 else -1.0
        if direction * (y0 - exit_at) >= 0:
            return FirstPassageSample(np.zeros(n_paths), 0, horizon)
        bounds = bounds if bounds is not None else (-math.inf, math.inf)
        job = lambda b: _passage_block_1d(seed, b, sizes[b], y0, g_red, beta, dt, n_steps, exit_at,
                                          direction, bounds, bridge)
    else:
        if field is None or exit_predicate is None:
            raise ValueError("give either g_red/exit_at or field/exit_predicate")
        p0 = np.asarray(initial, float)
        if bool(np.asarray(exit_predicate(p0[0:1], p0[1:2]))[0]):
            return FirstPassageSample(np.zeros(n_paths), 0, horizon)
        bounds = bounds if bounds is not None else field.bounds
        job = lambda b: _passage_block_2d(seed, b, sizes[b], p0, field, beta, dt, n_steps, exit_predicate, bounds)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(job, range(len(sizes))))
    else:
        parts = [job(b) for b in range(len(sizes))]
    times = np.concatenate(parts)
    done = times[~np.isnan(times)]
    if len(done) == 0:
        raise AllCensored(f"no path exited within horizon {horizon}")
    return FirstPassageSample(done, int(np.isnan(times).sum()), horizon)
