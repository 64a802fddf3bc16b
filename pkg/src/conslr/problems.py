"""Grids, models and initial conditions for the preset problems."""

from __future__ import annotations

import numpy as np

from . import htucker as ht
from . import lowrank as lr
from .config import PROBLEMS_2D, SimulationConfig
from .grid import WeightSpec, build_weights, periodic_axis, velocity_axis
from .stepper import Grids1D, Grids2D, Model1D, Model2D

_SQ2PI = np.sqrt(2.0 * np.pi)


def maxwellian(v) -> np.ndarray:
    return np.exp(-np.asarray(v) ** 2 / 2.0) / _SQ2PI


def build_grids(cfg: SimulationConfig):
    wspec = WeightSpec(cfg.weight_sigma)
    if cfg.problem in PROBLEMS_2D:
        x1 = periodic_axis(cfg.nx, cfg.length)
        v1 = velocity_axis(cfg.nv, cfg.v_max)
        w = build_weights(v1, wspec)
        # one shared axis/weight object keeps the 2D velocity basis identical
        return Grids2D(x1, x1, v1, v1, w, w, cfg.v_boundary)
    x = periodic_axis(cfg.nx, cfg.length)
    v = velocity_axis(cfg.nv, cfg.v_max)
    return Grids1D(x, v, build_weights(v, wspec), cfg.v_boundary)


def build_model(cfg: SimulationConfig):
    grids = build_grids(cfg)
    return Model2D(grids) if isinstance(grids, Grids2D) else Model1D(grids)


def initial_condition(cfg: SimulationConfig, grids):
    """Exact (untruncated) low-rank initial state for ``cfg.problem``."""
    p, a, k = cfg.problem, cfg.alpha, cfg.k
    if p in ("weak_landau_1d", "strong_landau_1d"):
        x, v = grids.x.points, grids.v.points
        return lr.from_separable_terms([(1.0 + a * np.cos(k * x), maxwellian(v))])
    if p == "bump_on_tail":
        x, v = grids.x.points, grids.v.points
        fv = (cfg.n_p * np.exp(-v**2 / 2.0)
              + cfg.n_b * np.exp(-(v - cfg.u) ** 2 / (2.0 * cfg.v_t)))
        return lr.from_separable_terms([(1.0 + a * np.cos(k * x), fv)])
    x1, x2 = grids.x1.points, grids.x2.points
    v = grids.v1.points
    one = np.ones_like(x1)
    if p == "weak_landau_2d":
        g = np.exp(-v**2 / 2.0)
        c = 1.0 / (2.0 * np.pi)
    elif p == "two_stream_2d":
        g = np.exp(-(v - cfg.v0) ** 2 / 2.0) + np.exp(-(v + cfg.v0) ** 2 / 2.0)
        c = 1.0 / (4.0 * 2.0 * np.pi)
    else:
        raise ValueError(f"unknown problem {p!r}")
    return ht.ht_from_separable([
        (one, one, g, g, c),
        (np.cos(k * x1), one, g, g, a * c),
        (one, np.cos(k * x2), g, g, a * c),
    ])
