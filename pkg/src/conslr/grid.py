"""Uniform phase-space grids, velocity weights and discrete inner products.

Conventions
-----------
* Periodic (spatial) axes drop the right endpoint: ``h = (hi - lo) / n``.
* Velocity axes include both endpoints ``-v_max`` and ``v_max``:
  ``h = (hi - lo) / (n - 1)``.
* Quadrature is a plain nodal sum times ``h``; no endpoint correction.

Two weight vectors are kept on :class:`VelocityWeights`.  ``pointwise`` holds
``w(v_j)`` and is what the conservative truncation scales frames by;
``w`` holds ``w(v_j) * h_v`` and is the quadrature weight of the weighted
inner product.  With that split, ``<f / w(v), g>_w = <f, g>`` holds exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

MIN_POINTS = 8


class GridError(ValueError):
    """Raised for degenerate grids or weights."""


@dataclass(frozen=True)
class AxisGrid:
    n: int
    lo: float
    hi: float
    periodic: bool
    h: float = field(init=False)
    points: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.n < MIN_POINTS:
            raise GridError(f"axis needs at least {MIN_POINTS} points, got {self.n}")
        if not self.lo < self.hi:
            raise GridError(f"degenerate domain [{self.lo}, {self.hi}]")
        if self.periodic:
            h = (self.hi - self.lo) / self.n
        else:
            h = (self.hi - self.lo) / (self.n - 1)
        if self.periodic:
            pts = self.lo + h * np.arange(self.n)
        else:
            # built around the midpoint so that a symmetric domain gives
            # v_j = -v_{n-1-j} bitwise
            mid = 0.5 * (self.lo + self.hi)
            pts = mid + h * (np.arange(self.n) - 0.5 * (self.n - 1))
            pts[0], pts[-1] = self.lo, self.hi
        pts.setflags(write=False)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "points", pts)

    @property
    def length(self) -> float:
        return self.hi - self.lo

    def __eq__(self, other):
        if not isinstance(other, AxisGrid):
            return NotImplemented
        return (self.n, self.lo, self.hi, self.periodic) == (
            other.n, other.lo, other.hi, other.periodic)

    def __hash__(self):
        return hash((self.n, self.lo, self.hi, self.periodic))


def build_axis(n: int, lo: float, hi: float, periodic: bool) -> AxisGrid:
    return AxisGrid(int(n), float(lo), float(hi), bool(periodic))


def velocity_axis(n: int, v_max: float) -> AxisGrid:
    return build_axis(n, -v_max, v_max, periodic=False)


def periodic_axis(n: int, length: float) -> AxisGrid:
    return build_axis(n, 0.0, length, periodic=True)


@dataclass(frozen=True)
class WeightSpec:
    """Gaussian weight ``exp(-v**2 / (2 sigma**2))``.

    ``sigma = 1`` gives ``exp(-v^2/2)``; ``sigma = sqrt(1.5)`` gives
    ``exp(-v^2/3)``.
    """

    sigma: float = 1.0

    def __call__(self, v):
        return np.exp(-np.asarray(v) ** 2 / (2.0 * self.sigma**2))

    @classmethod
    def from_denominator(cls, denom: float) -> "WeightSpec":
        """Weight ``exp(-v^2 / denom)``."""
        return cls(sigma=float(np.sqrt(denom / 2.0)))


@dataclass(frozen=True, eq=False)
class VelocityWeights:
    axis: AxisGrid
    pointwise: np.ndarray
    w: np.ndarray
    sqrt_w: np.ndarray
    inv_w: np.ndarray
    inv_sqrt_w: np.ndarray
    sigma: float

    @property
    def sqrt_pointwise(self) -> np.ndarray:
        return np.sqrt(self.pointwise)

    @property
    def inv_sqrt_pointwise(self) -> np.ndarray:
        return 1.0 / np.sqrt(self.pointwise)


def build_weights(axis: AxisGrid, form: WeightSpec | Callable | None = None,
                  min_weight: float | None = None) -> VelocityWeights:
    """Evaluate a velocity weight on ``axis``.

    ``min_weight`` is an optional guard on ``w(v_j) * h_v``; below it a
    :class:`GridError` is raised.  Exact underflow to zero is always an error.
    """
    if axis.periodic:
        raise GridError("velocity weights need a non-periodic axis")
    if form is None:
        form = WeightSpec()
    pointwise = np.asarray(form(axis.points), dtype=float)
    if np.any(pointwise <= 0.0) or not np.all(np.isfinite(pointwise)):
        raise GridError("weight underflows to zero on the velocity grid")
    w = pointwise * axis.h
    if min_weight is not None and w.min() < min_weight:
        raise GridError(f"minimum weight {w.min():.3e} below guard {min_weight:.3e}")
    sigma = getattr(form, "sigma", float("nan"))
    arrays = [pointwise, w, np.sqrt(w), 1.0 / w, 1.0 / np.sqrt(w)]
    for a in arrays:
        a.setflags(write=False)
    return VelocityWeights(axis, *arrays, sigma=sigma)


def _check_len(f, g):
    if f.shape[0] != g.shape[0]:
        raise GridError(f"length mismatch: {f.shape[0]} vs {g.shape[0]}")


def inner(f, g, axis: AxisGrid) -> float:
    """``h * sum(f * g)``."""
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    _check_len(f, g)
    _check_len(f, axis.points)
    return float(axis.h * np.dot(f, g))


def inner_w(f, g, weights: VelocityWeights) -> float:
    """``sum(f * g * w)`` with ``h`` already folded into ``w``."""
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    _check_len(f, g)
    _check_len(f, weights.w)
    return float(np.dot(f * g, weights.w))
