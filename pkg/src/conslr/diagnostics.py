"""Conserved-quantity diagnostics, time-series and snapshot export."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import htucker as ht
from .lowrank import LowRankMatrix

# Dense CSV exports larger than this many entries are refused.
SNAPSHOT_GUARD = 2**22

RANK_NAMES_2D = ("r1", "r2", "r3", "r4", "r12", "r34")


class SnapshotGuardError(ValueError):
    pass


@dataclass(frozen=True)
class DiagnosticsRecord:
    time: float
    total_mass: float
    total_momentum: tuple
    kinetic_energy: float
    electric_energy: float
    total_energy: float
    ranks: tuple
    mass_dev: float = 0.0
    momentum_dev: tuple = ()
    energy_dev: float = 0.0


def _rel(q, q0) -> float:
    return (q - q0) / abs(q0) if q0 != 0 else q - q0


def invariants(model, f, field, time: float = 0.0,
               baseline: DiagnosticsRecord | None = None,
               momentum_relative: bool = False) -> DiagnosticsRecord:
    """Totals of ``f`` and deviations against ``baseline`` (itself when ``None``).

    Momentum deviations are relative for ``momentum_relative`` and the
    absolute total momentum otherwise.
    """
    tot = model.totals(f)
    ee = model.electric_energy(field)
    total = tot["kinetic"] + ee
    mom = tuple(float(m) for m in tot["momentum"])
    base = baseline
    if base is None:
        base = DiagnosticsRecord(time, tot["mass"], mom, tot["kinetic"], ee, total, ())
    if momentum_relative:
        mdev = tuple(_rel(m, m0) for m, m0 in zip(mom, base.total_momentum))
    else:
        mdev = tuple(abs(m) for m in mom)
    return DiagnosticsRecord(
        time=float(time), total_mass=float(tot["mass"]), total_momentum=mom,
        kinetic_energy=float(tot["kinetic"]), electric_energy=ee, total_energy=total,
        ranks=tuple(model.ranks(f)),
        mass_dev=_rel(tot["mass"], base.total_mass), momentum_dev=mdev,
        energy_dev=_rel(total, base.total_energy))


def timeseries_header(dim: int) -> list[str]:
    mom = ["momentum_1"] if dim == 1 else ["momentum_1", "momentum_2"]
    ranks = ["rank_r"] if dim == 1 else [f"rank_{n}" for n in RANK_NAMES_2D]
    return ["time", "mass_dev", *mom, "energy_dev", "electric_energy", *ranks]


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_timeseries(records: Sequence[DiagnosticsRecord], path, dim: int | None = None
                     ) -> Path:
    """One CSV row per record, 17 significant digits."""
    path = Path(path)
    if dim is None:
        dim = len(records[0].total_momentum) if records else 1
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(timeseries_header(dim))
            for r in records:
                w.writerow([_fmt(r.time), _fmt(r.mass_dev),
                            *(_fmt(m) for m in r.momentum_dev),
                            _fmt(r.energy_dev), _fmt(r.electric_energy),
                            *(str(int(k)) for k in r.ranks)])
    except OSError as exc:
        raise OSError(f"cannot write time series to {path}: {exc}") from exc
    return path


def read_timeseries(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    cols = list(zip(*body)) if body else [()] * len(header)
    return {h: np.array([float(x) for x in c]) for h, c in zip(header, cols)}


def _write_grid(path: Path, rows, cols, values, corner: str) -> None:
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([corner, *(_fmt(c) for c in cols)])
            for r, line in zip(rows, values):
                w.writerow([_fmt(r), *(_fmt(x) for x in line)])
    except OSError as exc:
        raise OSError(f"cannot write snapshot to {path}: {exc}") from exc


def write_snapshot(f, grids, path, slice_index=(0, 0), full: bool = False) -> list[Path]:
    """Dense CSV export of a solution.

    1D1V writes ``f(x, v)``.  2D2V writes ``rho(x1, x2)`` to ``path`` and the
    velocity slice ``f(x1[i], x2[j], :, :)`` next to it with a ``_vslice``
    suffix; ``full=True`` requests the whole tensor and is refused above
    the size guard.
    """
    path = Path(path)
    if isinstance(f, LowRankMatrix):
        n = f.shape[0] * f.shape[1]
        if n > SNAPSHOT_GUARD:
            raise SnapshotGuardError(f"snapshot of {n} entries exceeds guard")
        _write_grid(path, grids.x.points, grids.v.points, f.dense(), "x\\v")
        return [path]
    if full:
        n = int(np.prod(f.shape))
        if n > SNAPSHOT_GUARD:
            raise SnapshotGuardError(
                f"full 2D2V export of {n} entries exceeds guard {SNAPSHOT_GUARD}")
        dense = f.dense().reshape(f.shape[0] * f.shape[1], -1)
        idx = np.arange(dense.shape[0])
        _write_grid(path, idx, np.arange(dense.shape[1]), dense, "x1x2\\v1v2")
        return [path]
    rho = ht.ht_moments(f, grids.v1, grids.v2)[0].dense()
    _write_grid(path, grids.x1.points, grids.x2.points, rho, "x1\\x2")
    i, j = slice_index
    U12 = np.einsum("a,b,abk->k", f.U[0][i], f.U[1][j], f.B12)
    vs = np.einsum("k,kl,ia,jb,abl->ij", U12, f.root, f.U[2], f.U[3], f.B34,
                   optimize=True)
    spath = path.with_name(path.stem + "_vslice" + path.suffix)
    _write_grid(spath, grids.v1.points, grids.v2.points, vs, "v1\\v2")
    return [path, spath]


def snapshot_name(t: float) -> str:
    return f"snapshot_t{t:g}.csv"


def read_grid(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Inverse of the CSV grid layout: ``(row_coords, col_coords, values)``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    cols = np.array([float(c) for c in rows[0][1:]])
    data = np.array([[float(x) for x in r] for r in rows[1:]])
    return data[:, 0], cols, data[:, 1:]
