"""Right-hand sides, time integrators and the truncation policy.

One step is: solve the field from the current solution, build the upwinded
transport terms as low-rank objects, combine them with the history by rank
concatenation, then truncate once.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from . import htucker as ht
from . import lowrank as lr
from .conservative_ht import build_vbasis2d, conservative_truncate_2d2v, project_f1_terms
from .grid import AxisGrid, VelocityWeights
from .poisson import Field1D, Field2D, solve_poisson_1d, solve_poisson_2d
from .stencils import DEFAULT_CLOSURE, split_flux_v, split_flux_x, upwind_pair

log = logging.getLogger(__name__)

# u^{n+1} = 3/4 u^n + 1/4 u^{n-2} + 3/2 dt F(u^n)
SSPML2_ALPHA = (0.75, 0.0, 0.25)
SSPML2_BETA = 1.5


class RankExplosionError(RuntimeError):
    pass


@dataclass(frozen=True)
class TruncationPolicy:
    mode: str = "conservative"
    eps: float = 1e-5
    level: int = 3
    rank_ceiling: int = 300

    def __post_init__(self):
        if self.mode not in ("conservative", "plain"):
            raise ValueError(f"unknown truncation mode {self.mode!r}")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.level not in (1, 2, 3):
            raise ValueError("projector level must be 1, 2 or 3")


@dataclass(frozen=True, eq=False)
class Grids1D:
    x: AxisGrid
    v: AxisGrid
    weights: VelocityWeights
    closure: str = DEFAULT_CLOSURE


@dataclass(frozen=True, eq=False)
class Grids2D:
    x1: AxisGrid
    x2: AxisGrid
    v1: AxisGrid
    v2: AxisGrid
    weights1: VelocityWeights
    weights2: VelocityWeights
    closure: str = DEFAULT_CLOSURE


def rhs_terms_1d1v(f: lr.LowRankMatrix, field: Field1D, grids: Grids1D
                   ) -> lr.LowRankMatrix:
    return lr.lr_sum([split_flux_x(f, grids.x, grids.v),
                      split_flux_v(f, field.E, grids.v, grids.closure)], [-1.0, -1.0])


def rhs_1d1v(f: lr.LowRankMatrix, field: Field1D, grids: Grids1D) -> lr.LowRankMatrix:
    """``-(v f_x) - (E f_v)``, sign-split and upwinded; rank ``4 r``."""
    return rhs_terms_1d1v(f, field, grids)


def rhs_terms_2d2v(f: ht.HTensor, field: Field2D, grids: Grids2D
                   ) -> list[ht.HTensor]:
    """Transport terms of ``-(v.grad_x f + E.grad_v f)``, each already negated.

    Leaves untouched by a term are shared (same array) with ``f``.
    """
    U1, U2, U3, U4 = f.U
    terms = []

    def term(u1, u2, u3, u4, sign=-1.0):
        return ht.HTensor((u1, u2, u3, u4), f.B12, f.B34, sign * f.root)

    for xaxis, vaxis, xi in ((grids.x1, grids.v1, 0), (grids.x2, grids.v2, 1)):
        Dp, Dm = upwind_pair(xaxis)
        v = vaxis.points
        for D, vs in ((Dp, np.maximum(v, 0.0)), (Dm, np.minimum(v, 0.0))):
            U = list(f.U)
            U[xi] = D(f.U[xi])
            U[xi + 2] = vs[:, None] * f.U[xi + 2]
            terms.append(term(*U))

    Dv = {1: upwind_pair(grids.v1, grids.closure), 2: upwind_pair(grids.v2, grids.closure)}
    r1, r2, r12 = U1.shape[1], U2.shape[1], f.B12.shape[2]
    for comp, sign, split in field.splits():
        R = split.rank
        if R == 0:
            continue
        # E_split (.) f in one term: the R rank-one factors of the field are
        # stacked into the x-leaves and B12 is repeated on the diagonal
        # blocks, so the node-(1,2) rank stays r12 instead of growing R-fold.
        a = split.C * split.U1
        u1 = (a[:, None, :] * U1[:, :, None]).reshape(U1.shape[0], -1, order="F")
        u2 = (split.U2[:, None, :] * U2[:, :, None]).reshape(U2.shape[0], -1, order="F")
        B12 = np.zeros((R, r1, R, r2, r12))
        for m in range(R):
            B12[m, :, m] = f.B12
        U = [u1, u2, U3, U4]
        U[comp + 1] = Dv[comp][0 if sign > 0 else 1](f.U[comp + 1])
        terms.append(ht.HTensor(tuple(U), B12.reshape(R * r1, R * r2, r12), f.B34,
                                -f.root))
    return terms


def rhs_2d2v(f: ht.HTensor, field: Field2D, grids: Grids2D) -> ht.HTensor:
    """The 2D2V right-hand side as one (orthogonalised) HT tensor."""
    return ht.ht_sum(rhs_terms_2d2v(f, field, grids))


class Model1D:
    """1D1V Vlasov-Poisson on ``LowRankMatrix`` states."""

    dim = 1

    def __init__(self, grids: Grids1D):
        self.grids = grids
        self._bases = {}

    def basis(self, level: int) -> lr.VBasis1D:
        if level not in self._bases:
            self._bases[level] = lr.build_vbasis(self.grids.weights, level)
        return self._bases[level]

    def solve_field(self, f) -> Field1D:
        return solve_poisson_1d(lr.moments(f, self.grids.v).rho, self.grids.x)

    def advance(self, states: Sequence, coeffs: Sequence[float], f, field, dt_coeff):
        rhs = rhs_terms_1d1v(f, field, self.grids)
        return lr.lr_sum([*states, rhs], [*coeffs, dt_coeff])

    def truncate(self, f, policy: TruncationPolicy):
        if policy.mode == "conservative":
            return lr.conservative_truncate(f, policy.eps, self.basis(policy.level))
        return lr.truncate_svd(f, policy.eps)

    def ranks(self, f) -> tuple[int, ...]:
        return (f.rank,)

    def max_rank(self, f) -> int:
        return f.rank

    def totals(self, f) -> dict:
        m = lr.moments(f, self.grids.v)
        h = self.grids.x.h
        return dict(mass=h * m.rho.sum(), momentum=(h * m.J.sum(),),
                    kinetic=h * m.kappa.sum())

    def electric_energy(self, field) -> float:
        return float(0.5 * self.grids.x.h * np.sum(field.E**2))


@dataclass(frozen=True, eq=False)
class PendingSum:
    """An untruncated sum together with the terms it was formed from."""

    value: ht.HTensor
    terms: list
    coeffs: list


class Model2D:
    """2D2V Vlasov-Poisson on ``HTensor`` states."""

    dim = 2

    def __init__(self, grids: Grids2D):
        self.grids = grids
        self.basis = build_vbasis2d(grids.weights1, grids.weights2)

    def moments(self, f):
        return ht.ht_moments(f, self.grids.v1, self.grids.v2)

    def solve_field(self, f) -> Field2D:
        rho = self.moments(f)[0]
        return solve_poisson_2d(rho, self.grids.x1, self.grids.x2)

    def advance(self, states, coeffs, f, field, dt_coeff) -> "PendingSum":
        terms = rhs_terms_2d2v(f, field, self.grids)
        terms = [*states, *terms]
        coeffs = [*coeffs, *([dt_coeff] * (len(terms) - len(states)))]
        return PendingSum(ht.ht_sum(terms, coeffs), terms, coeffs)

    def truncate(self, f, policy: TruncationPolicy):
        f1 = None
        if isinstance(f, PendingSum):
            if policy.mode == "conservative":
                f1 = project_f1_terms(f.value, f.terms, f.coeffs, self.basis)
            f = f.value
        if policy.mode == "conservative":
            return conservative_truncate_2d2v(f, policy.eps, self.basis, f1=f1)
        return ht.ht_truncate(f, policy.eps)

    def ranks(self, f) -> tuple[int, ...]:
        """Hierarchical ranks, capped by what the grid can hold.

        A conservative truncation stacks the frames of ``f1`` and of the
        truncated remainder, so raw column counts may exceed the grid size;
        re-orthogonalising would reduce them to these caps.
        """
        r1, r2, r3, r4, r12, r34 = f.ranks.as_tuple()
        n1, n2, n3, n4 = f.shape
        r1, r2, r3, r4 = min(r1, n1), min(r2, n2), min(r3, n3), min(r4, n4)
        return (r1, r2, r3, r4, min(r12, r1 * r2), min(r34, r3 * r4))

    def max_rank(self, f) -> int:
        return max(self.ranks(f))

    def totals(self, f) -> dict:
        g = self.grids
        vol = g.x1.h * g.x2.h
        rho, J1, J2, kap = self.moments(f)

        def total(m):
            return float(vol * (m.U1.sum(axis=0) * m.C) @ m.U2.sum(axis=0))

        return dict(mass=total(rho), momentum=(total(J1), total(J2)),
                    kinetic=total(kap))

    def electric_energy(self, field) -> float:
        g = self.grids
        return float(0.5 * g.x1.h * g.x2.h * (np.sum(field.E1**2) + np.sum(field.E2**2)))


def stable_dt(model, cfl: float = 0.3, e_bound: float = 1.0) -> float:
    """``cfl * min(h_x / v_max, h_v / e_bound)`` over all axes."""
    g = model.grids
    if model.dim == 1:
        vmax = max(abs(g.v.lo), abs(g.v.hi))
        return cfl * min(g.x.h / vmax, g.v.h / e_bound)
    vmax = max(abs(g.v1.lo), abs(g.v1.hi), abs(g.v2.lo), abs(g.v2.hi))
    return cfl * min(g.x1.h / vmax, g.x2.h / vmax, g.v1.h / e_bound, g.v2.h / e_bound)


@dataclass
class StepperState:
    f: Any
    dt: float
    time: float = 0.0
    step: int = 0
    history: deque = field(default_factory=lambda: deque(maxlen=2))
    field: Any = None


def _finish(model, state: StepperState, fnew, policy: TruncationPolicy) -> StepperState:
    fnew = model.truncate(fnew, policy)
    if model.max_rank(fnew) > policy.rank_ceiling:
        raise RankExplosionError(
            f"rank {model.ranks(fnew)} exceeds ceiling {policy.rank_ceiling} "
            f"at step {state.step + 1}")
    # newest first: history[0] = f^n, history[1] = f^{n-1} seen from f^{n+1}
    history = deque([state.f, *list(state.history)[:1]], maxlen=2)
    return StepperState(fnew, state.dt, state.time + state.dt, state.step + 1, history,
                        model.solve_field(fnew))


def step_forward_euler(model, state: StepperState, policy: TruncationPolicy
                       ) -> StepperState:
    """``f + dt * rhs(f)``, then truncation."""
    fld = state.field if state.field is not None else model.solve_field(state.f)
    fnew = model.advance([state.f], [1.0], state.f, fld, state.dt)
    return _finish(model, state, fnew, policy)


def step_sspml2(model, state: StepperState, policy: TruncationPolicy) -> StepperState:
    """Three-step second-order SSP multistep update; needs two prior states."""
    if len(state.history) < 2:
        raise ValueError("SSPML2 needs two previous solutions")
    fld = state.field if state.field is not None else model.solve_field(state.f)
    f_nm2 = state.history[1]
    fnew = model.advance([state.f, f_nm2], [SSPML2_ALPHA[0], SSPML2_ALPHA[2]],
                         state.f, fld, SSPML2_BETA * state.dt)
    return _finish(model, state, fnew, policy)


def step(model, state: StepperState, policy: TruncationPolicy,
         integrator: str = "sspml2") -> StepperState:
    """Advance one step, bootstrapping SSPML2 with forward Euler."""
    if integrator not in ("sspml2", "euler"):
        raise ValueError(f"unknown integrator {integrator!r}")
    if integrator == "euler" or len(state.history) < 2:
        return step_forward_euler(model, state, policy)
    return step_sspml2(model, state, policy)


def initial_state(model, f0, dt: float) -> StepperState:
    return StepperState(f0, dt, field=model.solve_field(f0))
