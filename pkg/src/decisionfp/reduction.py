"""Slow-fast reduction of the planar drift to a scalar drift on the slow manifold.

The Jacobian at the central saddle supplies a fast direction (the strongly
contracting eigenvector) and a slow one. In the coordinates

    (x, y) = M (nu - base),    rows of M = unit fast / slow eigenvectors,

the fast nullcline ``f(x*(y), y) = 0`` is continued in ``y``, and the reduced
dynamics is ``dy = g(x*(y), y) dt + beta dW`` with potential
``G(y) = -int_0^y g(x*(z), z) dz``.
"""
from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import CubicHermiteSpline, PchipInterpolator

from .errors import ComplexEigenvalues, NoSaddle, RootNotBracketed, SingularTransform
from .grids import Grid1
from .model import Equilibrium, ModelParams, as_field, find_equilibria

logger = logging.getLogger(__name__)

EPSILON_WARN = 0.3


@dataclass(frozen=True)
class SlowFastFrame:
    base_point: np.ndarray
    matrix: np.ndarray
    inverse: np.ndarray
    epsilon: float
    eigenvalues: tuple[float, float]  # (fast, slow)

    @property
    def dubious(self) -> bool:
        """True when the time-scale separation is too weak for the reduction."""
        return self.epsilon >= EPSILON_WARN

    @property
    def condition_number(self) -> float:
        return float(np.linalg.cond(self.matrix))

    @property
    def fast_direction(self) -> np.ndarray:
        return self.matrix[0]

    @property
    def slow_direction(self) -> np.ndarray:
        return self.matrix[1]

    def to_slowfast(self, nu1, nu2):
        d1 = np.asarray(nu1, float) - self.base_point[0]
        d2 = np.asarray(nu2, float) - self.base_point[1]
        m = self.matrix
        return m[0, 0] * d1 + m[0, 1] * d2, m[1, 0] * d1 + m[1, 1] * d2

    def to_rates(self, x, y):
        x, y = np.asarray(x, float), np.asarray(y, float)
        inv = self.inverse
        return (self.base_point[0] + inv[0, 0] * x + inv[0, 1] * y,
                self.base_point[1] + inv[1, 0] * x + inv[1, 1] * y)


def _orient(v: np.ndarray) -> np.ndarray:
    v = v / np.linalg.norm(v)
    if v[0] < 0 or (v[0] == 0 and v[1] < 0):
        v = -v
    return v


def frame_from_jacobian(jac, base_point=(0.0, 0.0)) -> SlowFastFrame:
    """Slow-fast frame from the eigen-decomposition of a 2x2 Jacobian.

    The eigenvalue of larger magnitude defines the fast direction. Both rows
    are unit vectors with a non-negative ``nu1`` component.
    """
    jac = np.asarray(jac, dtype=float)
    tr = jac[0, 0] + jac[1, 1]
    det = jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0]
    if tr * tr / 4.0 - det < 0:
        raise ComplexEigenvalues("Jacobian has complex eigenvalues; no slow/fast split")
    vals, vecs = np.linalg.eig(jac)
    vals, vecs = vals.real, vecs.real
    order = np.argsort(-np.abs(vals))
    lam_fast, lam_slow = vals[order[0]], vals[order[1]]
    if lam_fast == 0:
        raise SingularTransform("zero Jacobian")
    matrix = np.vstack([_orient(vecs[:, order[0]]), _orient(vecs[:, order[1]])])
    if abs(np.linalg.det(matrix)) < 1e-12:
        raise SingularTransform("fast and slow eigenvectors are parallel")
    inverse = np.linalg.inv(matrix)
    eps = abs(lam_slow) / abs(lam_fast)
    frame = SlowFastFrame(np.asarray(base_point, float), matrix, inverse, float(eps), (float(lam_fast), float(lam_slow)))
    if frame.dubious:
        warnings.warn(f"weak slow-fast separation: epsilon={eps:.3g}", RuntimeWarning, stacklevel=2)
    return frame


def central_saddle(equilibria: list[Equilibrium]) -> Equilibrium:
    saddles = [e for e in equilibria if e.kind == "saddle"]
    if not saddles:
        raise NoSaddle("no saddle equilibrium to linearise around")
    return min(saddles, key=lambda e: abs(e.location.nu1 - e.location.nu2))


def build_frame(params_or_field, base_point=None, equilibria=None) -> SlowFastFrame:
    """Frame at ``base_point``, or at the saddle closest to the diagonal."""
    fld = as_field(params_or_field)
    if base_point is None:
        if equilibria is None:
            equilibria = find_equilibria(fld)
        base_point = central_saddle(equilibria).location
    base = np.asarray(base_point, float)
    return frame_from_jacobian(fld.jacobian(base[0], base[1]), base)


@dataclass(frozen=True)
class SlowManifold:
    grid: Grid1
    g_red: np.ndarray
    G: np.ndarray
    x_star: np.ndarray | None = None
    frame: SlowFastFrame | None = None
    field: object = None
    multiple_root_indices: tuple[int, ...] = ()
    anchor: float = 0.0

    @property
    def y_grid(self) -> np.ndarray:
        return self.grid.centers

    @property
    def y_max(self) -> float:
        return max(abs(self.grid.lo), abs(self.grid.hi))

    def drift_at(self, y):
        """Monotone cubic interpolant of the reduced drift."""
        return _pchip(self.y_grid, self.g_red)(y)

    def potential_at(self, y):
        return CubicHermiteSpline(self.y_grid, self.G, -self.g_red)(y)

    def zeros(self) -> np.ndarray:
        """Interior zeros of the tabulated reduced drift (linear interpolation)."""
        return _sign_change_roots(self.y_grid, self.g_red)

    def fast_residual(self) -> np.ndarray:
        if self.x_star is None or self.frame is None:
            raise ValueError("manifold has no nullcline data")
        return fast_drift(self.frame, self.field, self.x_star, self.y_grid)

    def to_csv(self, path) -> None:
        x = self.x_star if self.x_star is not None else np.full_like(self.g_red, np.nan)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["y", "x_star", "g_red", "G"])
            for row in zip(self.y_grid, x, self.g_red, self.G):
                w.writerow([f"{v:.12e}" for v in row])

    @classmethod
    def from_drift(cls, g: Callable, y_max: float = None, n: int = 1001, *, lo=None, hi=None, anchor=0.0):
        """Manifold for an explicitly given scalar drift (no 2D model behind it)."""
        grid = Grid1(n, -y_max, y_max) if lo is None else Grid1(n, lo, hi)
        gv = np.asarray(g(grid.centers), dtype=float) * np.ones(n)
        return cls(grid, gv, potential_from_drift(grid.centers, gv, anchor), anchor=anchor)


def _pchip(x, v):
    return PchipInterpolator(x, v, extrapolate=True)


def _sign_change_roots(x, v) -> np.ndarray:
    s = np.sign(v)
    roots = list(x[s == 0])
    idx = np.nonzero(s[:-1] * s[1:] < 0)[0]
    for i in idx:
        roots.append(x[i] - v[i] * (x[i + 1] - x[i]) / (v[i + 1] - v[i]))
    return np.array(sorted(roots))


def potential_from_drift(y, g, anchor=0.0) -> np.ndarray:
    """Cumulative trapezoid of ``-g`` with ``G(anchor) = 0``."""
    G = -cumulative_trapezoid(g, y, initial=0.0)
    return G - np.interp(anchor, y, G)


def fast_drift(frame: SlowFastFrame, fld, x, y):
    nu1, nu2 = frame.to_rates(x, y)
    f1, f2 = fld(nu1, nu2)
    return frame.matrix[0, 0] * f1 + frame.matrix[0, 1] * f2


def slow_drift(frame: SlowFastFrame, fld, x, y):
    nu1, nu2 = frame.to_rates(x, y)
    f1, f2 = fld(nu1, nu2)
    return frame.matrix[1, 0] * f1 + frame.matrix[1, 1] * f2


def _fast_drift_dx(frame: SlowFastFrame, fld, x, y):
    nu1, nu2 = frame.to_rates(x, y)
    jac = fld.jacobian(nu1, nu2)
    col = frame.inverse[:, 0]
    return frame.matrix[0] @ jac @ col


def _root_in_bracket(f, dfdx, a, fa, b, fb, tol, max_iter=200):
    """Newton with bisection safeguard on a sign-changing bracket ``[a, b]``."""
    if fa > 0:
        a, b, fa, fb = b, a, fb, fa  # now f(a) < 0 < f(b)
    x = 0.5 * (a + b)
    fx = f(x)
    for _ in range(max_iter):
        if abs(fx) <= tol:
            return x, fx
        if fx < 0:
            a = x
        else:
            b = x
        d = dfdx(x)
        newton_ok = d != 0 and np.isfinite(d)
        if newton_ok:
            xn = x - fx / d
            newton_ok = min(a, b) < xn < max(a, b)
        x_new = xn if newton_ok else 0.5 * (a + b)
        if x_new == x:
            break
        x = x_new
        fx = f(x)
    return x, fx


def continue_roots(f, dfdx, ys, x_start=0.0, start_index=None, window=50.0, tol=1e-10):
    """Continue a root branch of ``f(x, y) = 0`` across the sorted ``ys``.

    Starting at ``ys[start_index]`` from ``x_start``, each neighbour is seeded
    with a linear extrapolation of the previous two roots; a symmetric bracket
    is grown around the seed until ``f`` changes sign, then refined.
    """
    ys = np.asarray(ys, float)
    n = len(ys)
    if start_index is None:
        start_index = int(np.argmin(np.abs(ys)))
    xs = np.full(n, np.nan)

    def solve_at(i, guess, step0):
        y = ys[i]
        fi = lambda x: float(f(x, y))
        di = lambda x: float(dfdx(x, y))
        fg = fi(guess)
        if abs(fg) <= tol:
            return guess
        s = step0
        while s <= window:
            a, b = guess - s, guess + s
            fa, fb = fi(a), fi(b)
            if fa == 0:
                return a
            if fb == 0:
                return b
            # prefer the nearer half-bracket to stay on the continued branch
            if fa * fg < 0:
                x, fx = _root_in_bracket(fi, di, a, fa, guess, fg, tol)
                break
            if fb * fg < 0:
                x, fx = _root_in_bracket(fi, di, guess, fg, b, fb, tol)
                break
            s *= 2.0
        else:
            raise RootNotBracketed(i, y)
        if abs(fx) > tol:
            raise RootNotBracketed(i, y)
        return x

    xs[start_index] = solve_at(start_index, x_start, 1e-3)
    for direction in (1, -1):
        i = start_index + direction
        while 0 <= i < n:
            prev = xs[i - direction]
            prev2 = xs[i - 2 * direction] if 0 <= i - 2 * direction < n and not np.isnan(xs[i - 2 * direction]) else prev
            guess = 2 * prev - prev2
            step0 = max(4.0 * abs(prev - prev2), 1e-6)
            xs[i] = solve_at(i, guess, step0)
            i += direction
    return xs


def _scan_multiple_roots(frame, fld, ys, window, n_scan=400):
    xs = np.linspace(-window, window, n_scan)
    X, Y = np.meshgrid(xs, ys)
    vals = fast_drift(frame, fld, X, Y)
    s = np.sign(vals)
    changes = np.sum(s[:, :-1] * s[:, 1:] < 0, axis=1)
    return tuple(int(i) for i in np.nonzero(changes > 1)[0])


def nullcline_solve(frame: SlowFastFrame, params_or_field, y_grid: Grid1, tol=1e-12) -> SlowManifold:
    """Solve ``f(x*(y), y) = 0`` on every node of ``y_grid`` by continuation."""
    fld = as_field(params_or_field)
    ys = y_grid.centers
    lo, hi = getattr(fld, "bounds", (0.0, 20.0))
    window = 2.0 * (hi - lo)
    xs = continue_roots(
        lambda x, y: fast_drift(frame, fld, x, y),
        lambda x, y: _fast_drift_dx(frame, fld, x, y),
        ys, 0.0, None, window, tol,
    )
    multi = _scan_multiple_roots(frame, fld, ys, window)
    if multi:
        logger.warning("fast nullcline has several roots at %d grid points; kept the continued branch", len(multi))
    nan = np.full(len(ys), np.nan)
    return SlowManifold(y_grid, nan, nan, xs, frame, fld, multi)


def reduced_drift(manifold: SlowManifold) -> np.ndarray:
    """``g(x*(y_i), y_i)``: slow component of the drift along the nullcline."""
    if manifold.x_star is None or manifold.frame is None:
        raise ValueError("reduced_drift needs a manifold with x_star filled")
    return slow_drift(manifold.frame, manifold.field, manifold.x_star, manifold.y_grid)


def build_potential(manifold: SlowManifold) -> np.ndarray:
    return potential_from_drift(manifold.y_grid, manifold.g_red, manifold.anchor)


def equilibrium_images(frame: SlowFastFrame, equilibria) -> np.ndarray:
    pts = np.array([e.location for e in equilibria], dtype=float)
    return frame.to_slowfast(pts[:, 0], pts[:, 1])[1]


def build_manifold(params_or_field, n: int = 1001, y_max: float | None = None, y_max_factor: float = 1.25,
                   frame: SlowFastFrame | None = None, equilibria=None) -> SlowManifold:
    """Frame, nullcline, reduced drift and potential in one call.

    ``y_max`` defaults to ``y_max_factor`` times the largest slow-coordinate
    image of any equilibrium, so that all of them fall inside
    ``[-y_max/y_max_factor, y_max/y_max_factor]``.
    """
    fld = as_field(params_or_field)
    if n % 2 == 0:
        n += 1  # keep y = 0 on a node
    if equilibria is None:
        equilibria = find_equilibria(fld)
    if frame is None:
        frame = build_frame(fld, equilibria=equilibria)
    if y_max is None:
        reach = np.max(np.abs(equilibrium_images(frame, equilibria)))
        if reach <= 0:
            lo, hi = fld.bounds
            reach = 0.25 * (hi - lo)
        y_max = y_max_factor * reach
    manifold = nullcline_solve(frame, fld, Grid1.symmetric(y_max, n))
    manifold = replace(manifold, g_red=reduced_drift(manifold))
    return replace(manifold, G=build_potential(manifold))


def manifold_for_params(params: ModelParams, **kwargs) -> SlowManifold:
    return build_manifold(params, **kwargs)
