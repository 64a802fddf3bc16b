import numpy as np
import pytest

from conslr import stencils
from conslr.grid import periodic_axis, velocity_axis
from conslr.lowrank import LowRankMatrix
from conslr.stencils import UpwindOperator, split_flux_v, split_flux_x, upwind_pair
from oracles import upwind_matrix

BACKENDS = ["numpy"] + (["compiled"] if stencils._compiled is not None else [])


@pytest.fixture(params=BACKENDS)
def backend(request):
    old = stencils.BACKEND
    stencils.set_backend(request.param)
    yield request.param
    stencils.set_backend(old)


@pytest.mark.parametrize("direction", ["plus", "minus"])
def test_constant_maps_to_zero(backend, direction):
    ax = periodic_axis(64, 2 * np.pi)
    assert not np.any(UpwindOperator(ax, direction).apply(np.ones(64)))


@pytest.mark.parametrize("direction", ["plus", "minus"])
def test_fifth_order_on_sine(backend, direction):
    errs = []
    for n in (64, 128):
        ax = periodic_axis(n, 2 * np.pi)
        x = ax.points
        errs.append(np.abs(UpwindOperator(ax, direction)(np.sin(x)) - np.cos(x)).max())
    assert errs[0] / errs[1] == pytest.approx(32, rel=0.1)


@pytest.mark.parametrize("direction", ["plus", "minus"])
def test_degree_five_polynomials_exact_in_interior(backend, direction):
    ax = velocity_axis(40, 1.0)
    v = ax.points
    out = UpwindOperator(ax, direction, closure="zero")(v**5)
    inner = slice(3, -3)
    assert np.abs(out[inner] - 5 * v[inner] ** 4).max() <= 1e-10


@pytest.mark.parametrize("direction", ["plus", "minus"])
@pytest.mark.parametrize("periodic,closure", [(True, "noflux"), (False, "zero"),
                                              (False, "noflux")])
def test_matrix_matches_oracle(backend, direction, periodic, closure):
    n = 20
    ax = periodic_axis(n, 3.0) if periodic else velocity_axis(n, 2.0)
    D = UpwindOperator(ax, direction, closure).matrix()
    ref = upwind_matrix(n, ax.h, direction == "plus", periodic, closure == "noflux")
    assert np.abs(D - ref).max() <= 1e-12 * np.abs(ref).max()


@pytest.mark.parametrize("direction", ["plus", "minus"])
def test_noflux_closure_conserves_sum(direction):
    ax = velocity_axis(32, 5.0)
    u = np.random.default_rng(5).standard_normal(32)
    noflux = UpwindOperator(ax, direction, "noflux")(u)
    zero = UpwindOperator(ax, direction, "zero")(u)
    assert abs(noflux.sum()) <= 1e-13 * np.abs(noflux).max()
    assert abs(zero.sum()) > 1e-3  # plain zero extension leaks through the edges


def test_boundary_labels():
    assert UpwindOperator(periodic_axis(16, 1.0)).boundary == "periodic"
    assert UpwindOperator(velocity_axis(16, 1.0), closure="zero").boundary == "zero"
    assert UpwindOperator(velocity_axis(16, 1.0)).boundary == "zero-noflux"


def test_invalid_arguments():
    ax = periodic_axis(16, 1.0)
    with pytest.raises(ValueError):
        UpwindOperator(ax, "up")
    with pytest.raises(ValueError):
        UpwindOperator(ax, closure="reflect")
    with pytest.raises(ValueError):
        UpwindOperator(ax)(np.ones(5))
    with pytest.raises(ValueError):
        stencils.set_backend("fortran")


def test_backends_agree_on_matrices():
    if stencils._compiled is None:
        pytest.skip("compiled kernel not built")
    u = np.random.default_rng(1).standard_normal((50, 7))
    for plus in (True, False):
        for periodic in (True, False):
            a = stencils.upwind_apply_numpy(u, plus, periodic, 3.0)
            b = stencils.upwind_apply_compiled(u, plus, periodic, 3.0)
            assert np.abs(a - b).max() <= 1e-14 * np.abs(a).max()


# --- flux splitting on low-rank states ---------------------------------------

def _random_state(rng, nx, nv, r):
    return LowRankMatrix(rng.random(r), rng.standard_normal((nx, r)),
                         rng.standard_normal((nv, r)))


def test_split_flux_x_of_x_independent_state(rng):
    xa, va = periodic_axis(32, 4 * np.pi), velocity_axis(32, 6.0)
    f = LowRankMatrix(np.ones(1), np.ones((32, 1)), rng.standard_normal((32, 1)))
    assert np.abs(split_flux_x(f, xa, va).dense()).max() <= 1e-13


def test_split_flux_x_matches_dense(rng):
    xa, va = periodic_axis(32, 4 * np.pi), velocity_axis(32, 6.0)
    f = _random_state(rng, 32, 32, 4)
    v = va.points
    Dp = upwind_matrix(32, xa.h, True, True)
    Dm = upwind_matrix(32, xa.h, False, True)
    F = f.dense()
    ref = Dp @ F * np.maximum(v, 0) + Dm @ F * np.minimum(v, 0)
    got = split_flux_x(f, xa, va)
    assert got.rank == 2 * f.rank
    assert np.abs(got.dense() - ref).max() <= 1e-12 * np.abs(ref).max()


def test_split_flux_v_matches_dense(rng):
    xa, va = periodic_axis(32, 4 * np.pi), velocity_axis(32, 6.0)
    f = _random_state(rng, 32, 32, 3)
    E = rng.standard_normal(32)
    F = f.dense()
    Dp = upwind_matrix(32, va.h, True, False, True)
    Dm = upwind_matrix(32, va.h, False, False, True)
    ref = np.maximum(E, 0)[:, None] * (F @ Dp.T) + np.minimum(E, 0)[:, None] * (F @ Dm.T)
    got = split_flux_v(f, E, va)
    assert np.abs(got.dense() - ref).max() <= 1e-12 * np.abs(ref).max()


def test_split_recombines_to_central_when_forced(rng, monkeypatch):
    xa, va = periodic_axis(32, 4 * np.pi), velocity_axis(32, 6.0)
    f = _random_state(rng, 32, 32, 2)
    D, _ = upwind_pair(xa)
    Dc = 0.5 * (D.matrix() + UpwindOperator(xa, "minus").matrix())

    def central_pair(axis, closure="noflux"):
        return (lambda u: Dc @ u), (lambda u: Dc @ u)

    monkeypatch.setattr(stencils, "upwind_pair", central_pair)
    got = split_flux_x(f, xa, va).dense()
    ref = (Dc @ f.dense()) * va.points
    assert np.abs(got - ref).max() <= 1e-12 * np.abs(ref).max()
