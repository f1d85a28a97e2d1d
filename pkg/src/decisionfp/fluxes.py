"""Exponentially fitted (Scharfetter-Gummel / Chang-Cooper) face fluxes and
the backward-Euler stepper shared by the 1D and 2D solvers."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.special import exprel

from .errors import SolverDivergence


def bernoulli(z):
    """``B(z) = z / (exp(z) - 1)``, with ``B(0) = 1``."""
    with np.errstate(over="ignore"):
        return 1.0 / exprel(np.asarray(z, dtype=float))


def sg_face_coefficients(v, diffusion: float, h: float):
    """Coefficients of the face flux ``a_plus * p_left - a_minus * p_right``.

    Exact for the steady flux of constant drift ``v`` and diffusion on one
    cell; both coefficients are non-negative, which gives an M-matrix.
    """
    v = np.asarray(v, dtype=float)
    if diffusion == 0:
        return np.maximum(v, 0.0), np.maximum(-v, 0.0)
    pe = v * h / diffusion
    scale = diffusion / h
    # B(z) + z = B(-z); the right-hand form avoids cancellation for z << 0
    return scale * bernoulli(-pe), scale * bernoulli(pe)


ROUNDOFF_FLOOR = 1e-14


class ImplicitStepper:
    """Backward Euler ``(I - dt A) p_new = p`` with a cached sparse LU.

    ``I - dt A`` is an M-matrix, so the exact solution of a non-negative
    right-hand side is non-negative. The LU solve can still return values like
    ``-1e-189`` in cells where the density has underflowed; negatives smaller
    than ``ROUNDOFF_FLOOR`` times the largest value are set to zero. Larger
    negatives are left in place for the caller's positivity audit.
    """

    def __init__(self, A: sp.spmatrix, dt: float, residual_tol: float = 1e-10):
        self.A = sp.csc_matrix(A)
        self.dt = dt
        self.residual_tol = residual_tol
        self.M = (sp.identity(self.A.shape[0], format="csc") - dt * self.A).tocsc()
        try:
            self._lu = spla.splu(self.M)
        except RuntimeError as exc:
            raise SolverDivergence(f"factorisation failed: {exc}") from exc

    def step(self, p: np.ndarray) -> np.ndarray:
        flat = p.ravel()
        out = self._lu.solve(flat)
        res = np.max(np.abs(self.M @ out - flat)) if flat.size else 0.0
        if not np.isfinite(res) or res > self.residual_tol * max(1.0, np.max(np.abs(flat))):
            raise SolverDivergence(f"linear solve residual {res:.3g}")
        if flat.size:
            floor = ROUNDOFF_FLOOR * np.max(np.abs(out))
            out[(out < 0) & (out > -floor)] = 0.0
        return out.reshape(p.shape)
