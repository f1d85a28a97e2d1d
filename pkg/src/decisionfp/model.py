"""Two-population Wilson-Cowan firing-rate model.

Drift field, sigmoid response function, analytic Jacobian and equilibrium
search/classification for

    dnu1 = psi1(nu1, nu2) dt + beta dW1
    dnu2 = psi2(nu1, nu2) dt + beta dW2

with psi_i = -nu_i + phi(lambda_i + w nu_i + w_hat nu_j).
"""
from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import NamedTuple, Protocol

import numpy as np

from .errors import NewtonDivergence, NoEquilibriumFound, ValidationError

logger = logging.getLogger(__name__)

EXP_CLAMP = 500.0


@dataclass(frozen=True)
class ModelParams:
    """Scalar parameters of the drift, noise and domain.

    Defaults are the values printed for the double-well experiments. Note that
    with a positive cross weight this set has a single, saturated equilibrium;
    use ``PRESETS["decision"]`` for the bistable regime.
    """

    nu_c: float = 20.0
    alpha: float = 4.0
    w: float = 0.45
    w_hat: float = 1.23
    lambda1: float = 15.0
    lambda2: float = 15.0
    beta: float = 0.3
    nu_max: float | None = None

    def __post_init__(self):
        for name in ("nu_c", "alpha", "w", "w_hat", "lambda1", "lambda2", "beta"):
            value = getattr(self, name)
            if not np.isfinite(value):
                raise ValidationError(name, "must be finite")
        if self.nu_c <= 0:
            raise ValidationError("nu_c", "must be > 0")
        if self.alpha <= 0:
            raise ValidationError("alpha", "must be > 0")
        if self.beta < 0:
            raise ValidationError("beta", "must be >= 0")
        if self.nu_max is None:
            object.__setattr__(self, "nu_max", float(self.nu_c))
        elif not self.nu_max > 0:
            raise ValidationError("nu_max", "must be > 0")

    @property
    def delta_lambda(self) -> float:
        return self.lambda1 - self.lambda2

    @property
    def unbiased(self) -> bool:
        return self.lambda1 == self.lambda2

    def with_bias(self, delta_lambda: float) -> "ModelParams":
        """Return a copy with ``lambda1 = lambda2 + delta_lambda``."""
        return dataclasses.replace(self, lambda1=self.lambda2 + delta_lambda)

    def replace(self, **changes) -> "ModelParams":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelParams":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValidationError(sorted(unknown)[0], "unknown model parameter")
        return cls(**{k: float(v) for k, v in data.items() if v is not None})


PRESETS = {
    # values as printed: nu_c=20, alpha=4, w=0.45, w_hat=1.23, beta=0.3, lambda=15
    "literal": ModelParams(),
    # inhibitory cross-coupling; bistable with a saddle at the symmetric state
    "decision": ModelParams(w_hat=-1.5),
}

# alternative spellings accepted in config files
PRESET_ALIASES = {"paper-s2": "literal"}

PRESET_BIAS = {"literal": 0.01, "decision": 0.01}


def resolve_preset(name: str) -> str:
    """Canonical preset name for ``name`` (aliases resolved). Raises KeyError."""
    name = PRESET_ALIASES.get(name, name)
    if name not in PRESETS:
        raise KeyError(name)
    return name


class Point2(NamedTuple):
    nu1: float
    nu2: float


@dataclass(frozen=True)
class Equilibrium:
    location: Point2
    eigenvalues: tuple[complex, complex]
    kind: str

    @property
    def complex_pair(self) -> bool:
        return abs(self.eigenvalues[0].imag) > 0.0

    @property
    def real_parts(self) -> tuple[float, float]:
        return (self.eigenvalues[0].real, self.eigenvalues[1].real)


def response_phi(z, params: ModelParams):
    """Sigmoid response ``nu_c / (1 + exp(-alpha (z/nu_c - 1)))``."""
    arg = np.clip(-params.alpha * (np.asarray(z, dtype=float) / params.nu_c - 1.0), -EXP_CLAMP, EXP_CLAMP)
    return params.nu_c / (1.0 + np.exp(arg))


def response_phi_prime(z, params: ModelParams):
    phi = response_phi(z, params)
    return (params.alpha / params.nu_c) * phi * (1.0 - phi / params.nu_c)


def drift(p, params: ModelParams):
    """Return ``(psi1, psi2)`` at ``p = (nu1, nu2)``; broadcasts over arrays."""
    nu1, nu2 = np.asarray(p[0], dtype=float), np.asarray(p[1], dtype=float)
    psi1 = -nu1 + response_phi(params.lambda1 + params.w * nu1 + params.w_hat * nu2, params)
    psi2 = -nu2 + response_phi(params.lambda2 + params.w_hat * nu1 + params.w * nu2, params)
    return psi1, psi2


def jacobian(p, params: ModelParams) -> np.ndarray:
    """Analytic Jacobian of the drift; shape ``(..., 2, 2)``."""
    nu1, nu2 = np.asarray(p[0], dtype=float), np.asarray(p[1], dtype=float)
    d1 = response_phi_prime(params.lambda1 + params.w * nu1 + params.w_hat * nu2, params)
    d2 = response_phi_prime(params.lambda2 + params.w_hat * nu1 + params.w * nu2, params)
    out = np.empty(np.broadcast(d1, d2).shape + (2, 2))
    out[..., 0, 0] = -1.0 + d1 * params.w
    out[..., 0, 1] = d1 * params.w_hat
    out[..., 1, 0] = d2 * params.w_hat
    out[..., 1, 1] = -1.0 + d2 * params.w
    return out


class VectorField2(Protocol):
    """Anything with a vectorised drift and Jacobian on a box domain."""

    bounds: tuple[float, float]

    def __call__(self, nu1, nu2): ...

    def jacobian(self, nu1, nu2) -> np.ndarray: ...


@dataclass(frozen=True)
class WilsonCowanField:
    params: ModelParams

    @property
    def bounds(self) -> tuple[float, float]:
        return (0.0, float(self.params.nu_max))

    def __call__(self, nu1, nu2):
        return drift((nu1, nu2), self.params)

    def jacobian(self, nu1, nu2):
        return jacobian((nu1, nu2), self.params)


@dataclass(frozen=True)
class LinearField:
    """Affine drift ``F(v) = A v + b``; handy for tests and sanity checks."""

    matrix: np.ndarray = field(default_factory=lambda: -np.eye(2))
    offset: np.ndarray = field(default_factory=lambda: np.zeros(2))
    bounds: tuple[float, float] = (0.0, 20.0)

    def __call__(self, nu1, nu2):
        a, b = np.asarray(self.matrix, float), np.asarray(self.offset, float)
        nu1, nu2 = np.asarray(nu1, float), np.asarray(nu2, float)
        return a[0, 0] * nu1 + a[0, 1] * nu2 + b[0], a[1, 0] * nu1 + a[1, 1] * nu2 + b[1]

    def jacobian(self, nu1, nu2):
        shape = np.broadcast(np.asarray(nu1), np.asarray(nu2)).shape
        return np.broadcast_to(np.asarray(self.matrix, float), shape + (2, 2)).copy()


def as_field(obj) -> VectorField2:
    if isinstance(obj, ModelParams):
        return WilsonCowanField(obj)
    return obj


def classify(eigenvalues) -> str:
    re = np.real(eigenvalues)
    if np.all(re < 0):
        return "stable"
    if np.all(re > 0):
        return "unstable"
    return "saddle"


def _eigenvalues(jac: np.ndarray) -> tuple[complex, complex]:
    tr = jac[0, 0] + jac[1, 1]
    det = jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0]
    disc = tr * tr / 4.0 - det
    if disc >= 0:
        # real pair, ascending
        lo, hi = np.sort(np.linalg.eigvals(jac).real)
        return (complex(lo), complex(hi))
    im = np.sqrt(-disc)
    return (complex(tr / 2, -im), complex(tr / 2, im))


def newton2d(field: VectorField2, x0, tol=1e-12, max_iter=60):
    """Damped Newton iteration for ``F(x) = 0``. Raises NewtonDivergence."""
    x = np.array(x0, dtype=float)
    fx = np.array(field(x[0], x[1]), dtype=float)
    norm = np.max(np.abs(fx))
    for _ in range(max_iter):
        if norm <= tol:
            return x, norm
        jac = field.jacobian(x[0], x[1])
        try:
            step = np.linalg.solve(jac, -fx)
        except np.linalg.LinAlgError:
            raise NewtonDivergence(f"singular Jacobian at {x}") from None
        t = 1.0
        while t > 1e-6:
            trial = x + t * step
            ft = np.array(field(trial[0], trial[1]), dtype=float)
            nt = np.max(np.abs(ft))
            if np.isfinite(nt) and nt < norm * (1 - 1e-4 * t) or nt <= tol:
                break
            t *= 0.5
        else:
            raise NewtonDivergence(f"line search failed from {x0}")
        x, fx, norm = trial, ft, nt
    if norm <= tol:
        return x, norm
    raise NewtonDivergence(f"no convergence from {x0} (|F|={norm:.3g})")


def find_equilibria(params_or_field, grid_n: int = 128, *, bounds=None, tol=1e-12, dedup_tol=1e-6):
    """Locate and classify all equilibria of a planar drift inside a box.

    Every grid cell whose corners bracket zero in both drift components seeds
    a Newton solve from the cell center. Converged roots inside the box are
    merged within ``dedup_tol`` and sorted by ``nu1``.
    """
    if grid_n < 32:
        raise ValueError("grid_n must be >= 32")
    fld = as_field(params_or_field)
    lo, hi = bounds if bounds is not None else fld.bounds
    nodes = np.linspace(lo, hi, grid_n + 1)
    n1, n2 = np.meshgrid(nodes, nodes, indexing="ij")
    f1, f2 = fld(n1, n2)

    def brackets(f):
        corners = np.stack([f[:-1, :-1], f[1:, :-1], f[:-1, 1:], f[1:, 1:]])
        return (corners.min(axis=0) <= 0) & (corners.max(axis=0) >= 0)

    cells = np.argwhere(brackets(f1) & brackets(f2))
    h = (hi - lo) / grid_n
    span = hi - lo
    found: list[np.ndarray] = []
    failures = 0
    for i, j in cells:
        seed = (lo + (i + 0.5) * h, lo + (j + 0.5) * h)
        try:
            root, _ = newton2d(fld, seed, tol=tol)
        except NewtonDivergence:
            failures += 1
            continue
        if np.any(root < lo - 1e-9 * span) or np.any(root > hi + 1e-9 * span):
            continue
        if any(np.max(np.abs(root - r)) <= dedup_tol for r in found):
            continue
        found.append(root)
    if failures:
        logger.debug("find_equilibria: %d Newton seeds diverged", failures)
    if not found:
        raise NoEquilibriumFound(f"no equilibrium in [{lo}, {hi}]^2 (scan {grid_n}^2)")
    found.sort(key=lambda r: (r[0], r[1]))
    out = []
    for r in found:
        ev = _eigenvalues(fld.jacobian(r[0], r[1]))
        out.append(Equilibrium(Point2(float(r[0]), float(r[1])), ev, classify(ev)))
    return out
