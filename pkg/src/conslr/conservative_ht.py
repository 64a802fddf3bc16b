"""Moment-preserving truncation of 2D2V hierarchical Tucker tensors.

``f`` is split into ``f1``, the weighted projection onto
``span{1, v1, v2, v1^2 + v2^2}`` in velocity, and the remainder ``f2``.
``f1`` has a fixed layout (root = I_4, ranks (r1, r2, 3, 3, 4, 4)) and is
kept; ``f2`` is truncated in the weighted norm and then has its leftover
moments projected out again, because truncating leaves 3 and 4 separately
does not keep the node-(3,4) frame orthogonal to the protected subspace.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import VelocityWeights
from .htucker import HTensor, ht_sum, ht_truncate, truncate_leaves12, velocity_functionals
from .lowrank import build_vbasis

F1_CLEANUP_EPS = 1e-15

_INV_SQRT2 = 1.0 / np.sqrt(2.0)


def _b34_f1() -> np.ndarray:
    B = np.zeros((3, 3, 4))
    B[0, 0, 0] = 1.0
    B[1, 0, 1] = 1.0
    B[0, 1, 2] = 1.0
    B[2, 0, 3] = _INV_SQRT2
    B[0, 2, 3] = _INV_SQRT2
    B.setflags(write=False)
    return B


@dataclass(frozen=True, eq=False)
class VBasis2D:
    weights1: VelocityWeights
    weights2: VelocityWeights
    c: float
    norms: np.ndarray  # c1, c2, c3
    W3: np.ndarray  # (N_v1, 3) normalised 1, v1, v1^2 - c
    W4: np.ndarray
    B34: np.ndarray
    # Leaf frames of f1 and of its 1/sqrt(w)-scaled copy, cached so the
    # same array objects are shared (and stacked once) by ht_sum.
    wW3: np.ndarray
    wW4: np.ndarray
    sW3: np.ndarray
    sW4: np.ndarray
    # A[m, k]: discrete moment m (rho, J1, J2, kappa) of the k-th f1 basis tensor
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

    def basis_tensors(self) -> np.ndarray:
        """Dense ``V_k`` as an array ``(4, N_v1, N_v2)`` (test use)."""
        return np.einsum("ia,jb,abk->kij", self.W3, self.W4, self.B34)


def build_vbasis2d(weights1: VelocityWeights, weights2: VelocityWeights) -> VBasis2D:
    a1, a2 = weights1.axis, weights2.axis
    same = (a1 == a2 and np.array_equal(weights1.pointwise, weights2.pointwise))
    if not same:
        raise ValueError("v1 and v2 must share grid and weight function")
    b = build_vbasis(weights1, 3)
    W = b.V / b.norms
    W3, W4 = W.copy(), W.copy()
    sq1, sq2 = weights1.sqrt_pointwise, weights2.sqrt_pointwise
    arrays = dict(
        W3=W3, W4=W4,
        wW3=weights1.pointwise[:, None] * W3, wW4=weights2.pointwise[:, None] * W4,
        sW3=sq1[:, None] * W3, sW4=sq2[:, None] * W4,
    )
    B34 = _b34_f1()
    probe = HTensor((np.ones((1, 1)), np.ones((1, 1)), arrays["wW3"], arrays["wW4"]),
                    np.ones((1, 1, 1)), B34, np.ones((1, 4)))
    arrays["moment_matrix"] = velocity_functionals(probe, a1, a2)
    for a in arrays.values():
        a.setflags(write=False)
    return VBasis2D(weights1, weights2, b.c, b.norms.copy(), B34=B34, **arrays)


def projection_coefficients(f: HTensor, basis: VBasis2D) -> np.ndarray:
    """``S[k, l34] = <U34_l34, V_k>``, shape ``(4, r34)``.

    Computed as ``A^{-1} F`` with ``F`` the discrete moments of the node-(3,4)
    frame and ``A`` those of the basis tensors: equal to the weighted inner
    products in exact arithmetic, but round-off in the basis moments cannot
    accumulate into a drift of the conserved totals.
    """
    F = velocity_functionals(f, basis.weights1.axis, basis.weights2.axis)
    return np.linalg.solve(basis.moment_matrix, F)


def projection_coefficients_inner(f: HTensor, basis: VBasis2D) -> np.ndarray:
    """The same coefficients from the weighted inner products directly (test use)."""
    h1 = basis.weights1.axis.h
    h2 = basis.weights2.axis.h
    g3 = h1 * (f.U[2].T @ basis.W3)
    g4 = h2 * (f.U[3].T @ basis.W4)
    return np.einsum("abl,ai,bj,ijk->kl", f.B34, g3, g4, basis.B34, optimize=True)


def project_f1(f: HTensor, basis: VBasis2D) -> HTensor:
    """The scaled orthogonal projection ``P~(f)``; leaves 1 and 2 are shared with ``f``."""
    S = projection_coefficients(f, basis)
    B12 = np.einsum("abm,mn,kn->abk", f.B12, f.root, S, optimize=True)
    return HTensor((f.U[0], f.U[1], basis.wW3, basis.wW4), B12, basis.B34, np.eye(4))


def project_f1_terms(f: HTensor, terms, coeffs, basis: VBasis2D) -> HTensor:
    """``P~`` of ``sum_t c_t terms[t]``, expressed in the leaf frames of ``f``.

    ``f`` must be an orthogonal HT form of that sum whose leaf-1 and leaf-2
    frames span those of every term (as produced by ``ht_sum``).  Moments are
    taken term by term, before re-orthogonalisation, so the round-off of the
    sum cannot shift the conserved totals.
    """
    a1, a2 = basis.weights1.axis, basis.weights2.axis
    Q1, Q2 = f.U[0], f.U[1]
    coef = np.zeros((Q1.shape[1], Q2.shape[1], 4))
    for c, t in zip(coeffs, terms):
        if t.root.size == 0:
            continue
        F = velocity_functionals(t, a1, a2)  # (4, r34)
        K = np.einsum("abk,kl,ml->abm", t.B12, t.root, F, optimize=True)
        P1 = Q1.T @ t.U[0]
        P2 = Q2.T @ t.U[1]
        coef += c * np.einsum("ia,jb,abm->ijm", P1, P2, K, optimize=True)
    B12 = np.einsum("ijm,km->ijk", coef, np.linalg.inv(basis.moment_matrix))
    return HTensor((Q1, Q2, basis.wW3, basis.wW4), B12, basis.B34, np.eye(4))


def _scale_velocity(f: HTensor, s1, s2) -> HTensor:
    return HTensor((f.U[0], f.U[1], s1[:, None] * f.U[2], s2[:, None] * f.U[3]),
                   f.B12, f.B34, f.root)


def _assemble(f1: HTensor, T: HTensor, PT: HTensor | None, basis: VBasis2D
              ) -> HTensor:
    """``f1 - PT + T`` with ``f1`` and ``PT`` sharing the node-(3,4) subtree."""
    r1f, r2f = f1.U[0].shape[1], f1.U[1].shape[1]
    s1, s2, s3, s4, s12, s34 = T.ranks
    U = (np.hstack([f1.U[0], T.U[0]]), np.hstack([f1.U[1], T.U[1]]),
         np.hstack([basis.wW3, T.U[2]]), np.hstack([basis.wW4, T.U[3]]))
    B12 = np.zeros((r1f + s1, r2f + s2, 4 + s12))
    B12[:r1f, :r2f, :4] = f1.B12
    if PT is not None:
        B12[r1f:, r2f:, :4] = -PT.B12
    B12[r1f:, r2f:, 4:] = T.B12
    B34 = np.zeros((3 + s3, 3 + s4, 4 + s34))
    B34[:3, :3, :4] = basis.B34
    B34[3:, 3:, 4:] = T.B34
    root = np.zeros((4 + s12, 4 + s34))
    root[:4, :4] = np.eye(4)
    root[4:, 4:] = T.root
    return HTensor(U, B12, B34, root)


def split_f1(f: HTensor, basis: VBasis2D, cleanup_eps: float = F1_CLEANUP_EPS,
             f1: HTensor | None = None) -> HTensor:
    if f1 is None:
        f1 = project_f1(f, basis)
    if cleanup_eps is not None:
        f1 = truncate_leaves12(f1, cleanup_eps)
    return f1


def conservative_truncate_2d2v(f: HTensor, eps: float, basis: VBasis2D, *,
                               repair: bool = True,
                               cleanup_eps: float = F1_CLEANUP_EPS,
                               f1: HTensor | None = None) -> HTensor:
    """Truncate ``f`` keeping ``rho, J1, J2, kappa`` of every x-cell.

    ``repair=False`` skips the final ``(I - P~)`` projection of the truncated
    remainder; it exists to demonstrate the resulting moment drift.  A
    precomputed projection ``f1`` (see :func:`project_f1_terms`) may be
    passed in place of ``P~(f)``.
    """
    f1 = split_f1(f, basis, cleanup_eps, f1)
    inv1 = basis.weights1.inv_sqrt_pointwise
    inv2 = basis.weights2.inv_sqrt_pointwise
    f1_scaled = HTensor((f1.U[0], f1.U[1], basis.sW3, basis.sW4), f1.B12, f1.B34,
                        f1.root)
    f2_scaled = ht_sum([_scale_velocity(f, inv1, inv2), f1_scaled], [1.0, -1.0])
    T = ht_truncate(f2_scaled, eps)
    T = _scale_velocity(T, basis.weights1.sqrt_pointwise,
                        basis.weights2.sqrt_pointwise)
    PT = project_f1(T, basis) if repair else None
    return _assemble(f1, T, PT, basis)
