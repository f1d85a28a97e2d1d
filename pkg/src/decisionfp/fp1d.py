"""Fokker-Planck equation on the slow manifold and the derived observables.

    dq/dt + d/dy ( g(y) q - (beta^2/2) dq/dy ) = 0,   zero flux at y = +-y_m

Reaction times come from the exact mean first-passage quadrature of the
reduced diffusion; performance is the steady-state mass in a decision basin.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.integrate import cumulative_trapezoid, trapezoid

from .errors import DegenerateMass, InvalidGeometry, NoWells
from .fluxes import ImplicitStepper, sg_face_coefficients
from .grids import DensityGrid1, Grid1
from .reduction import SlowManifold, _pchip


def _cell_drift(manifold: SlowManifold, grid: Grid1) -> np.ndarray:
    if grid == manifold.grid:
        return manifold.g_red
    return manifold.drift_at(grid.centers)


def fp1d_operator(grid: Grid1, g_cells: np.ndarray, beta: float) -> sp.csc_matrix:
    """Generator ``A`` with ``dq/dt = A q`` (exponential-fitting fluxes).

    Face drifts are the mean of the adjacent cell drifts, which makes
    ``exp(-2 G / beta^2)`` with trapezoidal ``G`` an exact discrete steady
    state.
    """
    n, h = grid.n, grid.h
    v = 0.5 * (g_cells[:-1] + g_cells[1:])
    a_plus, a_minus = sg_face_coefficients(v, 0.5 * beta * beta, h)
    # flux through face i+1/2 = a_plus q_i - a_minus q_{i+1}
    diag = np.zeros(n)
    diag[:-1] -= a_plus / h
    diag[1:] -= a_minus / h
    upper = a_minus / h  # d q_i / d q_{i+1}
    lower = a_plus / h  # d q_{i+1} / d q_i
    return sp.diags([lower, diag, upper], [-1, 0, 1], format="csc")


def face_fluxes(q: DensityGrid1, manifold: SlowManifold, beta: float) -> np.ndarray:
    """Probability flux at every face, boundary faces included (always zero)."""
    g = _cell_drift(manifold, q.grid)
    v = 0.5 * (g[:-1] + g[1:])
    a_plus, a_minus = sg_face_coefficients(v, 0.5 * beta * beta, q.grid.h)
    inner = a_plus * q.values[:-1] - a_minus * q.values[1:]
    return np.concatenate([[0.0], inner, [0.0]])


def solve_fp1d(q0: DensityGrid1, manifold: SlowManifold, beta: float, t_end: float, dt: float,
               snapshots: int = 0) -> DensityGrid1 | tuple[DensityGrid1, list[DensityGrid1]]:
    """Backward-Euler integration of the reduced Fokker-Planck equation.

    ``snapshots > 0`` additionally returns that many evenly spaced states.
    """
    if dt <= 0 or t_end < 0:
        raise ValueError("need dt > 0 and t_end >= 0")
    n_steps = max(1, int(math.ceil(t_end / dt - 1e-9))) if t_end > 0 else 0
    q = np.array(q0.values, dtype=float)
    shots = []
    if n_steps:
        step = t_end / n_steps
        A = fp1d_operator(q0.grid, _cell_drift(manifold, q0.grid), beta)
        stepper = ImplicitStepper(A, step)
        every = max(1, n_steps // snapshots) if snapshots else 0
        for k in range(1, n_steps + 1):
            q = stepper.step(q)
            if every and k % every == 0:
                shots.append(DensityGrid1(q0.grid, q.copy(), q0.time + k * step))
    out = DensityGrid1(q0.grid, q, q0.time + t_end)
    return (out, shots) if snapshots else out


def steady_state(manifold: SlowManifold, beta: float) -> DensityGrid1:
    """Normalized ``exp(-2 G / beta^2)`` on the manifold grid."""
    if beta <= 0:
        raise DegenerateMass("steady state needs beta > 0")
    expo = -2.0 * (manifold.G - np.min(manifold.G)) / (beta * beta)
    q = np.exp(expo)
    total = np.sum(q) * manifold.grid.h
    if not np.isfinite(total) or total <= 0:
        raise DegenerateMass("steady state has no representable mass")
    return DensityGrid1(manifold.grid, q / total, math.inf)


def uniform_density(grid: Grid1) -> DensityGrid1:
    return DensityGrid1(grid, np.full(grid.n, 1.0 / (grid.hi - grid.lo)))


def gaussian_density1(grid: Grid1, center: float, sd: float) -> DensityGrid1:
    v = np.exp(-0.5 * ((grid.centers - center) / sd) ** 2)
    return DensityGrid1(grid, v).normalized()


@dataclass(frozen=True)
class WellPartition:
    wells: np.ndarray
    barriers: np.ndarray
    labels: tuple[str, ...]
    lo: float
    hi: float

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"no well labelled {label!r}; have {self.labels}") from None

    def well(self, label: str) -> float:
        return float(self.wells[self.index(label)])

    def basin(self, label: str) -> tuple[float, float]:
        k = self.index(label)
        lo = self.lo if k == 0 else float(self.barriers[k - 1])
        hi = self.hi if k == len(self.wells) - 1 else float(self.barriers[k])
        return lo, hi

    @property
    def has_middle(self) -> bool:
        return "spontaneous-middle" in self.labels


def _labels(wells, y_span) -> tuple[str, ...]:
    n = len(wells)
    if n == 1:
        if abs(wells[0]) < 0.1 * y_span:
            return ("spontaneous-middle",)
        return ("decision-1",) if wells[0] > 0 else ("decision-2",)
    if n == 2:
        return ("decision-2", "decision-1")
    if n == 3:
        return ("decision-2", "spontaneous-middle", "decision-1")
    return ("decision-2",) + tuple(f"middle-{k}" for k in range(1, n - 1)) + ("decision-1",)


def partition_wells(manifold: SlowManifold) -> WellPartition:
    """Wells (minima of G) and barriers (maxima) from sign changes of ``g``.

    ``y > 0`` means population 1 leads, so the rightmost well is
    ``decision-1``. Barriers outside the outermost wells are dropped.
    """
    y, g = manifold.y_grid, manifold.g_red
    nz = np.nonzero(g)[0]
    wells, barriers = [], []
    for j, k in zip(nz[:-1], nz[1:]):
        if np.sign(g[j]) == np.sign(g[k]):
            continue
        if k == j + 1:
            root = y[j] - g[j] * (y[k] - y[j]) / (g[k] - g[j])
        else:
            root = 0.5 * (y[j + 1] + y[k - 1])
        (wells if g[j] > 0 else barriers).append(root)
    if not wells:
        raise NoWells("reduced potential has no interior minimum")
    wells = np.array(sorted(wells))
    barriers = np.array([b for b in sorted(barriers) if wells[0] < b < wells[-1]])
    if len(barriers) != len(wells) - 1:
        raise NoWells(f"inconsistent extrema: {len(wells)} wells, {len(barriers)} barriers")
    return WellPartition(wells, barriers, _labels(wells, manifold.y_max), manifold.grid.lo, manifold.grid.hi)


def mass_between(q: DensityGrid1, lo: float, hi: float) -> float:
    """Mass of a cell-averaged density in ``[lo, hi]`` (partial cells prorated)."""
    faces = q.grid.faces
    overlap = np.clip(np.minimum(faces[1:], hi) - np.maximum(faces[:-1], lo), 0.0, None)
    return float(np.sum(q.values * overlap))


def performance_at(q: DensityGrid1, partition: WellPartition, correct_well: str = "decision-1") -> float:
    lo, hi = partition.basin(correct_well)
    return min(1.0, max(0.0, mass_between(q, lo, hi) / q.mass))


def performance(manifold: SlowManifold, beta: float, partition: WellPartition | None = None,
                correct_well: str = "decision-1") -> float:
    """Steady-state probability of ending in the basin of ``correct_well``."""
    if partition is None:
        partition = partition_wells(manifold)
    if len(partition.wells) < 2:
        raise NoWells("performance needs at least two wells")
    return performance_at(steady_state(manifold, beta), partition, correct_well)


def mean_first_passage_time(manifold: SlowManifold, beta: float, start: float, absorb: float,
                            reflect: float) -> float:
    """Exact MFPT of the reduced diffusion from ``start`` to ``absorb``.

    Reflecting at ``reflect``; either orientation is allowed. Nested
    trapezoid quadrature on the manifold nodes plus the three end points,
    evaluated in log space.
    """
    if beta <= 0:
        raise ValueError("first-passage time needs beta > 0")
    lo, hi = sorted((reflect, absorb))
    if not lo <= start <= hi:
        raise InvalidGeometry(f"start {start} not between reflect {reflect} and absorb {absorb}")
    if lo < manifold.grid.lo - 1e-12 or hi > manifold.grid.hi + 1e-12:
        raise InvalidGeometry("interval leaves the manifold domain")
    if start == absorb:
        return 0.0
    ys = manifold.y_grid
    pts = np.unique(np.concatenate([ys[(ys > lo) & (ys < hi)], [lo, hi, start]]))
    G = manifold.potential_at(pts)
    if absorb < reflect:
        pts, G = pts[::-1], G[::-1]
    s = np.abs(pts - reflect)
    c = 2.0 / (beta * beta)
    shift = G.min()
    inner = cumulative_trapezoid(np.exp(-c * (G - shift)), s, initial=0.0)
    k0 = int(np.nonzero(pts == start)[0][0])
    with np.errstate(divide="ignore"):
        log_outer = c * (G[k0:] - shift) + np.log(inner[k0:])
    top = np.max(log_outer)
    integral = trapezoid(np.exp(log_outer - top), s[k0:])
    log_t = math.log(c) + top + math.log(integral) if integral > 0 else -math.inf
    return math.exp(log_t) if log_t < 709 else math.inf


def kramers_estimate(manifold: SlowManifold, beta: float, well: float, barrier: float) -> float:
    """Asymptotic escape time ``2 pi / sqrt(G''(well) |G''(barrier)|) exp(2 dG / beta^2)``."""
    dg = _pchip(manifold.y_grid, manifold.g_red).derivative()
    curv_well = -float(dg(well))
    curv_barrier = -float(dg(barrier))
    if curv_well <= 0 or curv_barrier >= 0:
        raise InvalidGeometry("Kramers estimate needs a minimum and a maximum of G")
    dG = float(manifold.potential_at(barrier) - manifold.potential_at(well))
    return 2.0 * math.pi / math.sqrt(curv_well * abs(curv_barrier)) * math.exp(2.0 * dG / (beta * beta))


@dataclass(frozen=True)
class ReactionProtocol:
    start: float
    absorb: float
    reflect: float
    target: str
    kind: str


def reaction_protocol(partition: WellPartition, correct_well: str = "decision-1",
                      manifold: SlowManifold | None = None) -> ReactionProtocol:
    """Start/absorb/reflect points for the reaction-time first-passage problem.

    With a middle well: start at its minimum and absorb at the deeper external
    well (``correct_well`` on ties). Otherwise start at the barrier next to
    ``correct_well`` and absorb at that well's minimum. The reflecting wall is
    the domain edge opposite the target.
    """
    if len(partition.wells) < 2:
        raise NoWells("reaction time needs at least two wells")
    if partition.has_middle:
        target = correct_well
        if manifold is not None:
            left, right = partition.wells[0], partition.wells[-1]
            g_left, g_right = manifold.potential_at([left, right])
            if not math.isclose(g_left, g_right, rel_tol=0, abs_tol=1e-12):
                target = partition.labels[0] if g_left < g_right else partition.labels[-1]
        start = partition.well("spontaneous-middle")
        kind = "three-well"
    else:
        target = correct_well
        k = partition.index(target)
        start = float(partition.barriers[k - 1] if k > 0 else partition.barriers[0])
        kind = "two-well"
    absorb = partition.well(target)
    reflect = partition.lo if absorb > start else partition.hi
    return ReactionProtocol(float(start), float(absorb), float(reflect), target, kind)


def reaction_time(manifold: SlowManifold, beta: float, partition: WellPartition | None = None,
                  correct_well: str = "decision-1") -> tuple[float, ReactionProtocol]:
    if partition is None:
        partition = partition_wells(manifold)
    proto = reaction_protocol(partition, correct_well, manifold)
    return mean_first_passage_time(manifold, beta, proto.start, proto.absorb, proto.reflect), proto


@dataclass(frozen=True)
class ObservableReport:
    reaction_time: float
    performance: float
    backend: str
    params_hash: str = ""
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (0.0 <= self.performance <= 1.0) and not math.isnan(self.performance):
            raise ValueError("performance must lie in [0, 1]")
