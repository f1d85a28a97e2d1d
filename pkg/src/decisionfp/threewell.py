"""Reduced three-well drift families indexed by the connectivity coefficient w_plus.

The built-in family is the cubic-quintic normal form

    g(y) = -(a y - b y^3 + c y^5) + gamma * delta_lambda * y^2,
    a = kappa * (w_crit - w_plus),

with ``b`` and ``c`` tied to ``a`` so that, without bias, the outer minima
sit at ``y = +-sqrt(Y)`` with depth ``D`` for every ``w_plus``. Below
``w_crit`` the origin is a third (middle) minimum; at ``w_crit`` it is flat;
above it the origin is a maximum. Only the middle of the landscape moves with
``w_plus``; the bias lowers the ``y > 0`` side while leaving ``y = 0`` an
extremum, as happens for the slow coordinate anchored at the saddle.

A user family can be plugged in as ``"package.module:function"`` with
signature ``function(y, w_plus, delta_lambda) -> g(y)``.
"""
from __future__ import annotations

import importlib
from dataclasses import dataclass, fields
from typing import Callable

import numpy as np

from .errors import ValidationError
from .reduction import SlowManifold

SUBCRITICAL_SEQUENCE = (2.5685, 2.5695, 2.5705)


@dataclass(frozen=True)
class ThreeWellParams:
    w_plus: float = 2.5695
    family: str = "cubic-quintic"
    w_crit: float = 2.5695
    kappa: float = 400.0
    well_position: float = 1.0
    well_depth: float = -0.2
    gamma: float = 2.0
    beta: float = 0.3
    y_max: float = 1.6
    n: int = 2001
    drift: str | None = None

    def __post_init__(self):
        if not self.w_plus > 0:
            raise ValidationError("w_plus", "must be > 0")
        if self.family not in ("cubic-quintic", "custom"):
            raise ValidationError("family", "must be 'cubic-quintic' or 'custom'")
        if self.family == "custom" and not self.drift:
            raise ValidationError("drift", "custom family needs 'module:function'")
        if self.well_position <= 0 or self.well_position >= self.y_max:
            raise ValidationError("well_position", "must lie in (0, y_max)")
        if self.well_depth >= 0:
            raise ValidationError("well_depth", "must be < 0")
        if self.beta <= 0:
            raise ValidationError("beta", "must be > 0")
        if self.n < 11:
            raise ValidationError("n", "must be >= 11")

    def replace(self, **changes) -> "ThreeWellParams":
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data.update(changes)
        return ThreeWellParams(**data)

    @property
    def coefficients(self) -> tuple[float, float, float]:
        """``(a, b, c)`` of the unbiased cubic-quintic drift."""
        a = self.kappa * (self.w_crit - self.w_plus)
        Y, D = self.well_position ** 2, self.well_depth
        c = (3.0 * a * Y - 12.0 * D) / Y**3
        b = (a + c * Y * Y) / Y
        return a, b, c


def load_callable(target: str) -> Callable:
    mod_name, _, attr = target.partition(":")
    if not mod_name or not attr:
        raise ValidationError("drift", f"expected 'module:function', got {target!r}")
    try:
        obj = getattr(importlib.import_module(mod_name), attr)
    except (ImportError, AttributeError) as exc:
        raise ValidationError("drift", f"cannot import {target!r}: {exc}") from None
    if not callable(obj):
        raise ValidationError("drift", f"{target!r} is not callable")
    return obj


def three_well_drift(params: ThreeWellParams, delta_lambda: float = 0.0) -> Callable:
    """Vectorised reduced drift ``g(y)`` for one ``(w_plus, delta_lambda)`` pair."""
    if params.family == "custom":
        fn = load_callable(params.drift)
        return lambda y: np.asarray(fn(np.asarray(y, float), params.w_plus, delta_lambda), float)
    a, b, c = params.coefficients
    tilt = params.gamma * delta_lambda

    def g(y):
        y = np.asarray(y, float)
        y2 = y * y
        return -y * (a - b * y2 + c * y2 * y2) + tilt * y2

    return g


def three_well_manifold(params: ThreeWellParams, delta_lambda: float = 0.0) -> SlowManifold:
    return SlowManifold.from_drift(three_well_drift(params, delta_lambda), params.y_max, params.n)
