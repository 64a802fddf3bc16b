import numpy as np
import pytest
from hypothesis import given, strategies as st

from conslr.grid import (GridError, WeightSpec, build_axis, build_weights, inner, inner_w,
                         periodic_axis, velocity_axis)


def test_velocity_axis_spacing_includes_endpoints():
    ax = build_axis(128, -6.0, 6.0, periodic=False)
    assert ax.h == pytest.approx(12.0 / 127, rel=1e-15)
    assert ax.points[0] == -6.0 and ax.points[-1] == 6.0
    assert np.allclose(np.diff(ax.points), ax.h, rtol=0, atol=1e-14)


def test_periodic_axis_drops_right_endpoint():
    ax = build_axis(64, 0.0, 4 * np.pi, periodic=True)
    assert ax.h == pytest.approx(4 * np.pi / 64, rel=1e-15)
    assert ax.points[0] == 0.0
    assert ax.points[-1] == pytest.approx(4 * np.pi - ax.h)


@pytest.mark.parametrize("n,lo,hi", [(2, 0.0, 1.0), (7, 0.0, 1.0), (16, 1.0, 1.0),
                                     (16, 2.0, 1.0)])
def test_degenerate_axes_rejected(n, lo, hi):
    with pytest.raises(GridError):
        build_axis(n, lo, hi, periodic=False)


def test_symmetric_velocity_grid_is_exactly_antisymmetric():
    for n in (64, 127, 128):
        v = velocity_axis(n, 6.0).points
        assert np.array_equal(v, -v[::-1])


def test_weight_values():
    ax = build_axis(121, -6.0, 6.0, periodic=False)
    assert ax.h == pytest.approx(0.1)
    w = build_weights(ax)
    assert w.w[60] == pytest.approx(0.1, rel=1e-14)  # w(0) h_v
    assert w.pointwise[-1] == pytest.approx(np.exp(-18.0), rel=1e-14)
    assert np.exp(-18.0) == pytest.approx(1.523e-8, rel=1e-3)
    w3 = build_weights(ax, WeightSpec.from_denominator(3.0))
    assert w3.pointwise[-1] == pytest.approx(np.exp(-12.0), rel=1e-13)
    assert np.exp(-12.0) == pytest.approx(6.14e-6, rel=1e-3)
    assert w3.sigma == pytest.approx(np.sqrt(1.5))


def test_weight_derived_vectors_consistent():
    w = build_weights(velocity_axis(128, 6.0))
    assert np.all(w.w > 0)
    assert np.allclose(w.inv_w * w.w, 1.0, rtol=1e-15, atol=0)
    assert np.allclose(w.sqrt_w**2, w.w, rtol=1e-15, atol=0)
    assert np.allclose(w.inv_sqrt_w * w.sqrt_w, 1.0, rtol=1e-15, atol=0)
    assert np.array_equal(w.w, w.pointwise * w.axis.h)


def test_weight_errors():
    with pytest.raises(GridError):
        build_weights(periodic_axis(16, 1.0))
    with pytest.raises(GridError):  # exp(-v^2/2) underflows to 0 at v = 40
        build_weights(velocity_axis(64, 40.0))
    with pytest.raises(GridError):
        build_weights(velocity_axis(128, 6.0), min_weight=1e-5)


def test_default_landau_domains_respect_weight_floor():
    w = build_weights(velocity_axis(128, 6.0), min_weight=1e-10)
    assert w.w.min() >= 1e-10


def test_inner_products():
    ax = build_axis(121, -6.0, 6.0, periodic=False)
    one = np.ones(121)
    assert inner(one, one, ax) == pytest.approx(12.1, rel=1e-14)
    w = build_weights(ax)
    assert abs(inner_w(one, ax.points, w)) <= 1e-16
    with pytest.raises(GridError):
        inner(one, one[:-1], ax)
    with pytest.raises(GridError):
        inner_w(one, one[:-1], w)


@given(st.integers(min_value=0, max_value=2**31))
def test_inner_w_symmetric_and_positive(seed):
    rng = np.random.default_rng(seed)
    w = build_weights(velocity_axis(64, 6.0))
    f, g = rng.standard_normal((2, 64))
    assert inner_w(f, g, w) == pytest.approx(inner_w(g, f, w), rel=1e-14, abs=1e-300)
    assert inner_w(f, f, w) >= 0.0


def test_v_orthogonal_to_shifted_square():
    ax = velocity_axis(128, 6.0)
    w = build_weights(ax)
    v = ax.points
    c = inner_w(np.ones_like(v), v**2, w) / inner_w(np.ones_like(v), np.ones_like(v), w)
    assert abs(inner_w(v, v**2 - c, w)) <= 1e-15
