"""Finite-volume solver for the planar Fokker-Planck equation

    dp/dt + div( F p - (beta^2/2) grad p ) = 0   on [lo, hi]^2

with zero total flux through every boundary face. Interior face fluxes use
exponential fitting, so the generator is an M-matrix whose columns sum to
zero: mass is conserved exactly and positivity holds for implicit steps of
any size and explicit steps under the CFL bound.
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import CflViolation, SingularTransform
from .fluxes import ImplicitStepper, sg_face_coefficients
from .grids import DensityGrid1, DensityGrid2, Grid1, Grid2, gaussian_density2
from .model import ModelParams, as_field, find_equilibria

logger = logging.getLogger(__name__)

MASS_TOL = 1e-10


def _face_coefficients(grid: Grid2, fld, beta: float):
    """SG coefficients on interior x-faces (shape (nx-1, ny)) and y-faces ((nx, ny-1))."""
    gx, gy = grid.axis_grids
    diff = 0.5 * beta * beta
    xf, yc = np.meshgrid(gx.faces[1:-1], gy.centers, indexing="ij")
    vx = fld(xf, yc)[0]
    xc, yf = np.meshgrid(gx.centers, gy.faces[1:-1], indexing="ij")
    vy = fld(xc, yf)[1]
    return sg_face_coefficients(vx, diff, grid.hx), sg_face_coefficients(vy, diff, grid.hy)


@dataclass
class FokkerPlanck2D:
    """Assembled generator ``A`` (``dp/dt = A p``, row-major ``i * ny + j`` ordering)."""

    grid: Grid2
    beta: float
    A: sp.csc_matrix
    x_coeffs: tuple[np.ndarray, np.ndarray]
    y_coeffs: tuple[np.ndarray, np.ndarray]

    @classmethod
    def assemble(cls, grid: Grid2, field, beta: float) -> "FokkerPlanck2D":
        fld = as_field(field)
        (axp, axm), (ayp, aym) = _face_coefficients(grid, fld, beta)
        nx, ny = grid.nx, grid.ny
        idx = np.arange(nx * ny).reshape(nx, ny)
        rows, cols, vals = [], [], []

        def couple(left, right, a_plus, a_minus, h):
            # flux left->right = a_plus p_left - a_minus p_right, divided by the cell width
            l, r = left.ravel(), right.ravel()
            ap, am = a_plus.ravel() / h, a_minus.ravel() / h
            rows.extend([l, l, r, r])
            cols.extend([l, r, l, r])
            vals.extend([-ap, am, ap, -am])

        couple(idx[:-1, :], idx[1:, :], axp, axm, grid.hx)
        couple(idx[:, :-1], idx[:, 1:], ayp, aym, grid.hy)
        A = sp.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(nx * ny, nx * ny))
        return cls(grid, beta, A, (axp, axm), (ayp, aym))

    @property
    def max_explicit_dt(self) -> float:
        """Largest explicit step keeping ``I + dt A`` non-negative."""
        rate = float(np.max(-self.A.diagonal()))
        return math.inf if rate <= 0 else 1.0 / rate

    def fluxes(self, values: np.ndarray):
        """Face fluxes including boundary faces: shapes (nx+1, ny) and (nx, ny+1)."""
        (axp, axm), (ayp, aym) = self.x_coeffs, self.y_coeffs
        fx = np.zeros((self.grid.nx + 1, self.grid.ny))
        fy = np.zeros((self.grid.nx, self.grid.ny + 1))
        fx[1:-1] = axp * values[:-1, :] - axm * values[1:, :]
        fy[:, 1:-1] = ayp * values[:, :-1] - aym * values[:, 1:]
        return fx, fy

    def boundary_flux(self, values: np.ndarray) -> float:
        fx, fy = self.fluxes(values)
        return float(np.sum(np.abs(fx[[0, -1], :])) * self.grid.hy + np.sum(np.abs(fy[:, [0, -1]])) * self.grid.hx)


def _check_invariants(values: np.ndarray, mass0: float, area: float, where: str) -> None:
    mass = float(np.sum(values) * area)
    if abs(mass - mass0) > MASS_TOL * max(1.0, abs(mass0)):
        logger.warning("%s: mass drifted from %.15g to %.15g", where, mass0, mass)
    if np.min(values) < 0:
        logger.warning("%s: negative density %.3g", where, float(np.min(values)))


def fp2d_step(p: DensityGrid2, field, beta: float, dt: float, *, mode: str = "implicit",
              operator: FokkerPlanck2D | None = None) -> DensityGrid2:
    """Advance one step. ``mode`` is ``"explicit"`` (forward Euler) or ``"implicit"``."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    op = operator or FokkerPlanck2D.assemble(p.grid, field, beta)
    if mode == "explicit":
        if dt > op.max_explicit_dt:
            raise CflViolation(f"dt={dt:g} exceeds explicit limit {op.max_explicit_dt:.4g}")
        flat = p.values.ravel()
        new = flat + dt * (op.A @ flat)
        # tiny negative round-off (|v| ~ 1e-300) is clipped; the scheme itself is positive
        new = np.maximum(new, 0.0).reshape(p.values.shape)
    elif mode == "implicit":
        new = ImplicitStepper(op.A, dt).step(p.values)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return DensityGrid2(p.grid, new, p.time + dt)


def solve_fp2d(p0: DensityGrid2, field, beta: float, t_end: float, dt: float, *, mode: str = "implicit",
               snapshots: int = 0, check_every: int = 1):
    """Integrate to ``t_end``. With ``snapshots > 0`` also returns evenly spaced states.

    Mass and positivity are audited every ``check_every`` steps and any
    violation is logged.
    """
    if dt <= 0 or t_end < 0:
        raise ValueError("need dt > 0 and t_end >= 0")
    grid = p0.grid
    op = FokkerPlanck2D.assemble(grid, field, beta)
    n_steps = max(1, int(math.ceil(t_end / dt - 1e-9))) if t_end > 0 else 0
    step = t_end / n_steps if n_steps else dt
    if mode == "explicit" and step > op.max_explicit_dt:
        raise CflViolation(f"dt={step:g} exceeds explicit limit {op.max_explicit_dt:.4g}")
    stepper = ImplicitStepper(op.A, step) if mode == "implicit" and n_steps else None
    v = np.array(p0.values, dtype=float)
    mass0 = float(np.sum(v) * grid.cell_area)
    every = max(1, n_steps // snapshots) if snapshots and n_steps else 0
    shots = []
    for k in range(1, n_steps + 1):
        if stepper is not None:
            v = stepper.step(v)
        else:
            flat = v.ravel()
            v = np.maximum(flat + step * (op.A @ flat), 0.0).reshape(v.shape)
        if check_every and k % check_every == 0:
            _check_invariants(v, mass0, grid.cell_area, f"step {k}")
        if every and k % every == 0:
            shots.append(DensityGrid2(grid, v.copy(), p0.time + k * step))
    out = DensityGrid2(grid, v, p0.time + t_end)
    return (out, shots) if snapshots else out


def central_state(equilibria):
    """The saddle closest to the diagonal, or the closest equilibrium if there is no saddle."""
    saddles = [e for e in equilibria if e.kind == "saddle"] or list(equilibria)
    return min(saddles, key=lambda e: abs(e.location.nu1 - e.location.nu2)).location


def default_initial_density(params: ModelParams, grid: Grid2, equilibria=None) -> DensityGrid2:
    """Gaussian with sd ``nu_c / 20`` centred on :func:`central_state`."""
    eqs = equilibria if equilibria is not None else find_equilibria(params)
    return gaussian_density2(grid, central_state(eqs), params.nu_c / 20.0)


def marginal(p: DensityGrid2, axis: int) -> DensityGrid1:
    """Density of ``nu1`` (axis 0) or ``nu2`` (axis 1), normalized to unit mass."""
    if axis not in (0, 1):
        raise ValueError("axis must be 0 or 1")
    g = p.grid
    gx, gy = g.axis_grids
    if axis == 0:
        values, grid1 = p.values.sum(axis=1) * g.hy, gx
    else:
        values, grid1 = p.values.sum(axis=0) * g.hx, gy
    return DensityGrid1(grid1, values, p.time).normalized()


def _uniform_sum_cdf(t, w1: float, w2: float):
    """CDF of ``U1 + U2`` at ``t`` measured from the support's left end,
    with ``U1 ~ U(0, w1)`` and ``U2 ~ U(0, w2)`` independent."""
    if min(w1, w2) <= 1e-9 * max(w1, w2):
        w = max(w1, w2)
        return np.clip(t / w, 0.0, 1.0)
    r = lambda u: 0.5 * np.maximum(u, 0.0) ** 2  # noqa: E731
    return (r(t) - r(t - w1) - r(t - w2) + r(t - w1 - w2)) / (w1 * w2)


def project_onto_direction(p: DensityGrid2, transform, y_grid: Grid1, *, offset=None,
                           chunk: int = 4096) -> DensityGrid1:
    """Density of ``y = row_2 . (nu - offset)`` by exact conservative binning.

    ``transform`` is a :class:`~decisionfp.reduction.SlowFastFrame` (its
    matrix and base point are used) or a 2x2 matrix whose second row defines
    ``y``. Each cell's mass is spread uniformly over the cell, so its image
    in ``y`` has a trapezoidal law whose CDF is evaluated at the bin edges.
    Mass falling outside ``y_grid`` is dropped and the result renormalized.
    """
    if hasattr(transform, "matrix"):
        matrix, base = np.asarray(transform.matrix, float), np.asarray(transform.base_point, float)
    else:
        matrix, base = np.asarray(transform, float), np.zeros(2)
    if offset is not None:
        base = np.asarray(offset, float)
    if matrix.shape != (2, 2) or abs(np.linalg.det(matrix)) < 1e-12 * max(1.0, np.max(np.abs(matrix))) ** 2:
        raise SingularTransform("projection matrix is singular")
    g = p.grid
    x, y = g.centers()
    a, b = matrix[1]
    w1, w2 = abs(a) * g.hx, abs(b) * g.hy
    left = (a * (x - base[0]) + b * (y - base[1])).ravel() - 0.5 * (w1 + w2)
    mass = p.values.ravel() * g.cell_area
    edges = y_grid.faces
    counts = np.zeros(y_grid.n)
    keep = mass > 0
    left, mass = left[keep], mass[keep]
    for k in range(0, left.size, chunk):
        cdf = _uniform_sum_cdf(edges[None, :] - left[k:k + chunk, None], w1, w2)
        # the closed form cancels in floating point; keep it a proper CDF
        cdf = np.maximum.accumulate(np.clip(cdf, 0.0, 1.0), axis=1)
        counts += mass[k:k + chunk] @ np.diff(cdf, axis=1)
    total = counts.sum()
    if total <= 0:
        raise SingularTransform("no mass projects inside the target interval")
    lost = 1.0 - total / max(p.mass, 1e-300)
    if lost > 1e-6:
        logger.info("projection dropped %.3g of the mass outside the y interval", lost)
    return DensityGrid1(y_grid, counts / (total * y_grid.h), p.time)


def params_hash(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, default=float).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def write_snapshot(p: DensityGrid2, path, *, params: dict | None = None) -> tuple[Path, Path]:
    """Write ``nu1,nu2,p`` rows plus a JSON sidecar with time and parameter hash."""
    path = Path(path)
    x, y = p.grid.centers()
    with path.open("w", newline="") as fh:
        fh.write("nu1,nu2,p\n")
        for a, b, c in zip(x.ravel(), y.ravel(), p.values.ravel()):
            fh.write(f"{a:.10g},{b:.10g},{c:.12e}\n")
    meta = {
        "time": p.time,
        "nx": p.grid.nx,
        "ny": p.grid.ny,
        "domain": [p.grid.lo, p.grid.hi],
        "params_hash": params_hash(params or {}),
    }
    side = path.with_suffix(".json")
    side.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path, side
