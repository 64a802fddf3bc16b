"""Fifth-order upwind finite differences applied to frame columns.

``D+`` (for positive transport speed) uses offsets -3..+2::

    (-2 u[i-3] + 15 u[i-2] - 60 u[i-1] + 20 u[i] + 30 u[i+1] - 3 u[i+2]) / (60 h)

``D-`` is its mirror image.  Periodic axes wrap; non-periodic (velocity)
axes treat the three ghost nodes beyond each end as zero.  Both stencils are
flux differences, ``D u_i = (F_{i+1/2} - F_{i-1/2}) / h``, e.g. for ``D+``::

    F_{i+1/2} = (2 u[i-2] - 13 u[i-1] + 47 u[i] + 27 u[i+1] - 3 u[i+2]) / 60

With plain zero extension the two outermost fluxes are generally nonzero,
so mass leaks through ``+-v_max`` at the level of the boundary values.  The
default ``"noflux"`` closure sets exactly those two fluxes to zero, making
``sum_i (D u)_i = 0`` on velocity axes as well; interior rows are unchanged.

The kernel comes from the compiled extension when it was built and from a
NumPy implementation otherwise; ``BACKEND`` says which one is active.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .grid import AxisGrid
from .lowrank import LowRankMatrix

# integer weights are summed first and scaled once, so a constant column
# cancels exactly
_PLUS_INT = np.array([-2.0, 15.0, -60.0, 20.0, 30.0, -3.0])
_MINUS_INT = np.array([3.0, -30.0, -20.0, 60.0, -15.0, 2.0])
PLUS_COEFFS = _PLUS_INT / 60.0
PLUS_OFFSETS = np.arange(-3, 3)
MINUS_COEFFS = _MINUS_INT / 60.0
MINUS_OFFSETS = np.arange(-2, 4)


def upwind_apply_numpy(u: np.ndarray, plus: bool, periodic: bool, inv_h: float
                       ) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    n = u.shape[0]
    coeffs, offsets = (_PLUS_INT, PLUS_OFFSETS) if plus else (_MINUS_INT, MINUS_OFFSETS)
    if periodic:
        padded = np.concatenate([u[-3:], u, u[:3]], axis=0)
    else:
        pad = np.zeros((3,) + u.shape[1:])
        padded = np.concatenate([pad, u, pad], axis=0)
    out = np.zeros_like(u)
    for c, o in zip(coeffs, offsets):
        out += c * padded[3 + o:3 + o + n]
    out *= inv_h / 60.0
    return out


try:
    if os.environ.get("CONSLR_PURE_PYTHON"):
        raise ImportError
    from ._ext.upwind import upwind_apply as _compiled
except ImportError:
    _compiled = None


def upwind_apply_compiled(u, plus, periodic, inv_h):
    if _compiled is None:
        raise RuntimeError("compiled kernel not available")
    u = np.asarray(u, dtype=float)
    squeeze = u.ndim == 1
    out = _compiled(u[:, None] if squeeze else u, plus, periodic, inv_h)
    return out[:, 0] if squeeze else out


BACKEND = "compiled" if _compiled is not None else "numpy"
_kernel = upwind_apply_compiled if _compiled is not None else upwind_apply_numpy


def set_backend(name: str) -> None:
    """Switch between ``"compiled"`` and ``"numpy"`` (benchmarks, tests)."""
    global BACKEND, _kernel
    if name == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernel not available")
        _kernel = upwind_apply_compiled
    elif name == "numpy":
        _kernel = upwind_apply_numpy
    else:
        raise ValueError(f"unknown backend {name!r}")
    BACKEND = name


CLOSURES = ("noflux", "zero")
DEFAULT_CLOSURE = "noflux"


def _outer_fluxes(u: np.ndarray, plus: bool):
    """``(F_{-1/2}, F_{N-1/2})`` under zero ghosts."""
    if plus:
        left = (27.0 * u[0] - 3.0 * u[1]) / 60.0
        right = (2.0 * u[-3] - 13.0 * u[-2] + 47.0 * u[-1]) / 60.0
    else:
        left = (47.0 * u[0] - 13.0 * u[1] + 2.0 * u[2]) / 60.0
        right = (-3.0 * u[-2] + 27.0 * u[-1]) / 60.0
    return left, right


@dataclass(frozen=True)
class UpwindOperator:
    axis: AxisGrid
    direction: str = "plus"
    closure: str = DEFAULT_CLOSURE

    def __post_init__(self):
        if self.direction not in ("plus", "minus"):
            raise ValueError("direction must be 'plus' or 'minus'")
        if self.closure not in CLOSURES:
            raise ValueError(f"closure must be one of {CLOSURES}")

    @property
    def boundary(self) -> str:
        if self.axis.periodic:
            return "periodic"
        return "zero" if self.closure == "zero" else "zero-noflux"

    @property
    def coefficients(self) -> np.ndarray:
        return PLUS_COEFFS if self.direction == "plus" else MINUS_COEFFS

    @property
    def offsets(self) -> np.ndarray:
        return PLUS_OFFSETS if self.direction == "plus" else MINUS_OFFSETS

    def apply(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape[0] != self.axis.n:
            raise ValueError(f"length {u.shape[0]} does not match axis size {self.axis.n}")
        plus = self.direction == "plus"
        inv_h = 1.0 / self.axis.h
        out = _kernel(u, plus, self.axis.periodic, inv_h)
        if not self.axis.periodic and self.closure == "noflux":
            left, right = _outer_fluxes(u, plus)
            out[0] += inv_h * left
            out[-1] -= inv_h * right
        return out

    __call__ = apply

    def matrix(self) -> np.ndarray:
        return self.apply(np.eye(self.axis.n))


def upwind_pair(axis: AxisGrid, closure: str = DEFAULT_CLOSURE
                ) -> tuple[UpwindOperator, UpwindOperator]:
    return UpwindOperator(axis, "plus", closure), UpwindOperator(axis, "minus", closure)


def split_flux_x(f: LowRankMatrix, xaxis: AxisGrid, vaxis: AxisGrid) -> LowRankMatrix:
    """Upwinded ``v f_x`` as a rank-``2r`` object."""
    Dp, Dm = upwind_pair(xaxis)
    v = vaxis.points
    vp, vm = np.maximum(v, 0.0), np.minimum(v, 0.0)
    return LowRankMatrix(np.concatenate([f.C, f.C]),
                         np.hstack([Dp(f.U1), Dm(f.U1)]),
                         np.hstack([vp[:, None] * f.U2, vm[:, None] * f.U2]))


def split_flux_v(f: LowRankMatrix, E, vaxis: AxisGrid, closure: str = DEFAULT_CLOSURE
                 ) -> LowRankMatrix:
    """Upwinded ``E f_v`` as a rank-``2r`` object."""
    E = np.asarray(E, dtype=float)
    Dp, Dm = upwind_pair(vaxis, closure)
    Ep, Em = np.maximum(E, 0.0), np.minimum(E, 0.0)
    return LowRankMatrix(np.concatenate([f.C, f.C]),
                         np.hstack([Ep[:, None] * f.U1, Em[:, None] * f.U1]),
                         np.hstack([Dp(f.U2), Dm(f.U2)]))
