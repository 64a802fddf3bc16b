"""Rank-r matrices ``sum_l C_l U1[:, l] (x) U2[:, l]`` for 1D1V distributions.

The x-frame ``U1`` is ``(N_x, r)``, the v-frame ``U2`` is ``(N_v, r)``.
Arithmetic concatenates frames; only the truncations recompress.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .grid import AxisGrid, VelocityWeights


class ShapeError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class LowRankMatrix:
    C: np.ndarray
    U1: np.ndarray
    U2: np.ndarray
    orthonormal: bool = False

    def __post_init__(self):
        C = np.asarray(self.C, dtype=float).reshape(-1)
        U1 = np.asarray(self.U1, dtype=float)
        U2 = np.asarray(self.U2, dtype=float)
        if U1.ndim != 2 or U2.ndim != 2:
            raise ShapeError("frames must be 2-D")
        if not (U1.shape[1] == U2.shape[1] == C.shape[0]):
            raise ShapeError(
                f"rank mismatch: C {C.shape[0]}, U1 {U1.shape[1]}, U2 {U2.shape[1]}")
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "U1", U1)
        object.__setattr__(self, "U2", U2)

    @property
    def rank(self) -> int:
        return self.C.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.U1.shape[0], self.U2.shape[0]

    def dense(self) -> np.ndarray:
        return (self.U1 * self.C) @ self.U2.T

    def __neg__(self):
        return scale(self, -1.0)

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return add(self, scale(other, -1.0))

    def __mul__(self, alpha):
        return scale(self, alpha)

    __rmul__ = __mul__


def zeros(nx: int, nv: int) -> LowRankMatrix:
    return LowRankMatrix(np.zeros(0), np.zeros((nx, 0)), np.zeros((nv, 0)), True)


def from_separable_terms(terms: Sequence[tuple]) -> LowRankMatrix:
    """Build from ``(x_vector, v_vector[, coefficient])`` tuples, no truncation."""
    if len(terms) == 0:
        raise ValueError("need at least one term")
    xs, vs, cs = [], [], []
    for t in terms:
        x, v = np.asarray(t[0], float), np.asarray(t[1], float)
        c = float(t[2]) if len(t) > 2 else 1.0
        xs.append(x)
        vs.append(v)
        cs.append(c)
    if len({x.shape for x in xs}) != 1 or len({v.shape for v in vs}) != 1:
        raise ShapeError("inconsistent term lengths")
    return LowRankMatrix(np.array(cs), np.column_stack(xs), np.column_stack(vs))


def from_dense(a: np.ndarray, eps: float = 0.0) -> LowRankMatrix:
    U, s, Vt = np.linalg.svd(np.asarray(a, float), full_matrices=False)
    k = tail_rank(s, eps)
    return LowRankMatrix(s[:k], U[:, :k], Vt[:k].T, True)


def _check_same_shape(a: LowRankMatrix, b: LowRankMatrix):
    if a.shape != b.shape:
        raise ShapeError(f"grid mismatch: {a.shape} vs {b.shape}")


def add(a: LowRankMatrix, b: LowRankMatrix) -> LowRankMatrix:
    _check_same_shape(a, b)
    return LowRankMatrix(np.concatenate([a.C, b.C]),
                         np.hstack([a.U1, b.U1]),
                         np.hstack([a.U2, b.U2]))


def lr_sum(terms: Iterable[LowRankMatrix], coeffs: Iterable[float] | None = None
           ) -> LowRankMatrix:
    """Linear combination by rank concatenation."""
    terms = list(terms)
    if coeffs is None:
        coeffs = [1.0] * len(terms)
    coeffs = list(coeffs)
    for t in terms[1:]:
        _check_same_shape(terms[0], t)
    return LowRankMatrix(np.concatenate([c * t.C for c, t in zip(coeffs, terms)]),
                         np.hstack([t.U1 for t in terms]),
                         np.hstack([t.U2 for t in terms]))


def scale(f: LowRankMatrix, alpha: float) -> LowRankMatrix:
    return LowRankMatrix(alpha * f.C, f.U1, f.U2, f.orthonormal and alpha >= 0)


def scale_x(f: LowRankMatrix, a) -> LowRankMatrix:
    a = np.asarray(a, float)
    if a.shape != (f.shape[0],):
        raise ShapeError(f"x-vector length {a.shape} does not match N_x={f.shape[0]}")
    return LowRankMatrix(f.C, a[:, None] * f.U1, f.U2)


def scale_v(f: LowRankMatrix, b) -> LowRankMatrix:
    b = np.asarray(b, float)
    if b.shape != (f.shape[1],):
        raise ShapeError(f"v-vector length {b.shape} does not match N_v={f.shape[1]}")
    return LowRankMatrix(f.C, f.U1, b[:, None] * f.U2)


def map_x(f: LowRankMatrix, op) -> LowRankMatrix:
    """Apply a linear operator (callable on ``(N, r)`` arrays or a matrix) to U1."""
    U1 = op(f.U1) if callable(op) else np.asarray(op) @ f.U1
    return LowRankMatrix(f.C, U1, f.U2)


def map_v(f: LowRankMatrix, op) -> LowRankMatrix:
    U2 = op(f.U2) if callable(op) else np.asarray(op) @ f.U2
    return LowRankMatrix(f.C, f.U1, U2)


def tail_rank(s: np.ndarray, eps: float) -> int:
    """Smallest k with ``sqrt(sum(s[k:]**2)) <= eps`` (``s`` sorted descending)."""
    if s.size == 0:
        return 0
    tails = np.sqrt(np.cumsum((s**2)[::-1]))[::-1]  # tails[k] = norm of s[k:]
    keep = np.nonzero(tails > eps)[0]
    return int(keep[-1] + 1) if keep.size else 0


def _qr(a: np.ndarray):
    if a.shape[1] == 0:
        return np.zeros((a.shape[0], 0)), np.zeros((0, 0))
    return np.linalg.qr(a)


def truncate_svd(f: LowRankMatrix, eps: float) -> LowRankMatrix:
    """Drop the smallest singular tail whose 2-norm is at most ``eps``.

    Guarantees ``||dense(f) - dense(result)||_F <= eps``.  Costs
    ``O(r^2 N + r^3)`` via QR of both frames and an SVD of the small core.
    """
    nx, nv = f.shape
    if f.rank == 0:
        return zeros(nx, nv)
    Q1, R1 = _qr(f.U1)
    Q2, R2 = _qr(f.U2)
    core = (R1 * f.C) @ R2.T
    P, s, Qt = np.linalg.svd(core)
    k = tail_rank(s, eps)
    return LowRankMatrix(s[:k].copy(), Q1 @ P[:, :k], Q2 @ Qt[:k].T, True)


def frobenius_norm(f: LowRankMatrix) -> float:
    if f.rank == 0:
        return 0.0
    _, R1 = _qr(f.U1)
    _, R2 = _qr(f.U2)
    return float(np.linalg.norm((R1 * f.C) @ R2.T))


@dataclass(frozen=True)
class Moments1D:
    rho: np.ndarray
    J: np.ndarray
    kappa: np.ndarray

    def as_array(self) -> np.ndarray:
        return np.vstack([self.rho, self.J, self.kappa])


def moments(f: LowRankMatrix, vaxis: AxisGrid) -> Moments1D:
    """Density, current and kinetic energy density by rank-wise contraction."""
    v = vaxis.points
    if f.shape[1] != v.shape[0]:
        raise ShapeError("velocity grid does not match the v-frame")
    G = vaxis.h * np.column_stack([np.ones_like(v), v, 0.5 * v * v])  # (N_v, 3)
    proj = (f.U2.T @ G) * f.C[:, None]  # (r, 3)
    out = f.U1 @ proj  # (N_x, 3)
    return Moments1D(out[:, 0].copy(), out[:, 1].copy(), out[:, 2].copy())


@dataclass(frozen=True, eq=False)
class VBasis1D:
    """Weighted-orthogonal basis ``{1, v, v^2 - c}`` truncated to ``level`` vectors.

    ``norms[k]`` is ``||V_k||_w``; the orthogonalisation constant ``c`` is
    ``<1, v^2>_w / <1, 1>_w``.
    """

    weights: VelocityWeights
    level: int
    c: float
    norms: np.ndarray
    V: np.ndarray  # (N_v, 3), always all three columns
    # A[m, k] = m-th discrete moment (rho, J, kappa) of w * V_k
    moment_matrix: np.ndarray

    @property
    def c1(self) -> float:
        return float(self.norms[0])

    @property
    def c2(self) -> float:
        return float(self.norms[1])

    @property
    def c3(self) -> float:
        return float(self.norms[2])

    @property
    def active(self) -> np.ndarray:
        return self.V[:, :self.level]


def build_vbasis(weights: VelocityWeights, level: int = 3) -> VBasis1D:
    if level not in (1, 2, 3):
        raise ValueError(f"projector level must be 1, 2 or 3, got {level}")
    v = weights.axis.points
    w = weights.w
    one = np.ones_like(v)
    c = float(np.dot(w, v * v) / np.dot(w, one))
    V = np.column_stack([one, v, v * v - c])
    norms = np.sqrt(np.einsum("jk,jk,j->k", V, V, w))
    V.setflags(write=False)
    G = weights.axis.h * np.column_stack([one, v, 0.5 * v * v])
    A = G.T @ (weights.pointwise[:, None] * V)
    return VBasis1D(weights, level, c, norms, V, A)


def projection_coefficients(mom: Moments1D, basis: VBasis1D) -> np.ndarray:
    """``M_k(x)`` of the projection, shape ``(N_x, level)``.

    In exact arithmetic ``M = (rho / c1^2, J / c2^2, (2 kappa - c rho) / c3^2)``.
    Solving against the basis' own discrete moments instead gives the same
    values but removes the O(1e-17) odd moments of the even basis vectors,
    which would otherwise bias the momentum by a fixed amount every step.
    """
    L = basis.level
    rhs = mom.as_array()[:L]
    return np.linalg.solve(basis.moment_matrix[:L, :L], rhs).T


def project_f1(mom: Moments1D, basis: VBasis1D) -> LowRankMatrix:
    """Rank-``level`` part ``sum_k M_k (x) (w * V_k)`` carrying the moments."""
    M = projection_coefficients(mom, basis)
    wV = basis.weights.pointwise[:, None] * basis.active
    return LowRankMatrix(np.ones(basis.level), M, wV)


def split_conservative(f: LowRankMatrix, basis: VBasis1D):
    """Return ``(f1, f2)`` with ``f = f1 + f2`` and ``f2`` free of the protected moments."""
    f1 = project_f1(moments(f, basis.weights.axis), basis)
    return f1, add(f, scale(f1, -1.0))


def weighted_truncate(f2: LowRankMatrix, eps: float, weights: VelocityWeights
                      ) -> LowRankMatrix:
    """``sqrt(w) * T_eps(f2 / sqrt(w))`` with pointwise weights."""
    scaled = scale_v(f2, weights.inv_sqrt_pointwise)
    return scale_v(truncate_svd(scaled, eps), weights.sqrt_pointwise)


def conservative_truncate(f: LowRankMatrix, eps: float, basis: VBasis1D
                          ) -> LowRankMatrix:
    """Truncate while keeping the discrete moments protected by ``basis``.

    The rank-``level`` projection ``f1`` is kept verbatim; only the
    moment-free remainder is compressed, in the weighted norm.
    """
    f1, f2 = split_conservative(f, basis)
    return add(f1, weighted_truncate(f2, eps, basis.weights))
