"""The time loop tying config, stepper and diagnostics together."""

from __future__ import annotations

import logging
import math
import platform
import sys
import time as _time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import config as cfgmod
from . import stencils
from .diagnostics import (DiagnosticsRecord, invariants, snapshot_name, write_snapshot,
                          write_timeseries)
from .problems import build_model, initial_condition
from .stepper import TruncationPolicy, initial_state, stable_dt, step

log = logging.getLogger("conslr")

FAILURE_MARKER = "FAILED"


@dataclass
class RunResult:
    config: cfgmod.SimulationConfig
    records: list[DiagnosticsRecord]
    state: object
    model: object
    dt: float
    nsteps: int
    wall_time: float
    outdir: Path | None = None
    snapshots: list[Path] = field(default_factory=list)


def time_grid(cfg: cfgmod.SimulationConfig, model) -> tuple[float, int]:
    """Fixed step and step count; ``dt`` is shrunk so ``nsteps * dt == t_end``."""
    dt0 = stable_dt(model, cfg.cfl, cfg.e_bound)
    if cfg.t_end == 0:
        return dt0, 0
    n = max(1, math.ceil(cfg.t_end / dt0 - 1e-9))
    return cfg.t_end / n, n


def policy_for(cfg: cfgmod.SimulationConfig) -> TruncationPolicy:
    return TruncationPolicy(cfg.mode, cfg.eps, cfg.level, cfg.rank_ceiling)


def write_manifest(path: Path, cfg, *, status: str, dt: float, nsteps: int,
                   wall: float, extra: str = "") -> None:
    lines = [
        "# conslr run manifest",
        f"status = {status}",
        f"conslr_version = {__version__}",
        f"python = {platform.python_version()}",
        f"numpy = {np.__version__}",
        f"platform = {platform.platform()}",
        f"stencil_backend = {stencils.BACKEND}",
        f"dt = {dt!r}",
        f"nsteps = {nsteps}",
        f"wall_time_s = {wall:.3f}",
    ]
    if extra:
        lines.append(f"error = {extra}")
    lines.append("# config")
    path.write_text("\n".join(lines) + "\n" + cfgmod.serialize(cfg))


def run_simulation(cfg: cfgmod.SimulationConfig, outdir=None, f0=None) -> RunResult:
    """Run ``cfg`` to ``t_end``; write outputs into ``outdir`` when given.

    ``f0`` overrides the preset initial condition (custom problems go
    through the API this way).  On failure the partial time series, a
    manifest with ``status = failed`` and a ``FAILED`` marker file are
    written before the exception propagates.
    """
    t_start = _time.perf_counter()
    model = build_model(cfg)
    f0 = initial_condition(cfg, model.grids) if f0 is None else f0
    dt, nsteps = time_grid(cfg, model)
    policy = policy_for(cfg)
    out = Path(outdir) if outdir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / FAILURE_MARKER).unlink(missing_ok=True)

    state = initial_state(model, f0, dt)
    rec0 = invariants(model, state.f, state.field, 0.0,
                      momentum_relative=cfg.momentum_relative)
    records = [rec0]
    snaps = sorted(set(cfg.snapshot_times))
    snap_steps = {t: round(t / dt) for t in snaps if t <= cfg.t_end + 1e-12}
    written: list[Path] = []

    def snapshot(st):
        if out is None:
            return
        for t, n in snap_steps.items():
            if n == st.step:
                written.extend(write_snapshot(st.f, model.grids, out / snapshot_name(t),
                                              cfg.slice_index))

    log.info("%s: %d steps of dt=%.4g, mode=%s eps=%g", cfg.problem, nsteps, dt,
             cfg.mode, cfg.eps)
    try:
        snapshot(state)
        for n in range(nsteps):
            state = step(model, state, policy, cfg.integrator)
            if state.step % cfg.output_every == 0 or state.step == nsteps:
                rec = invariants(model, state.f, state.field, state.time, rec0,
                                 cfg.momentum_relative)
                records.append(rec)
                if cfg.log_every and (state.step % cfg.log_every == 0
                                      or state.step == nsteps):
                    log.info("step %d t=%.4f ranks=%s mass_dev=%.3e mom=%s "
                             "energy_dev=%.3e", state.step, state.time, rec.ranks,
                             rec.mass_dev, ", ".join(f"{m:.3e}" for m in rec.momentum_dev),
                             rec.energy_dev)
            snapshot(state)
    except Exception as exc:
        if out is not None:
            wall = _time.perf_counter() - t_start
            write_timeseries(records, out / "timeseries.csv", model.dim)
            write_manifest(out / "manifest.txt", cfg, status="failed", dt=dt,
                           nsteps=nsteps, wall=wall, extra=f"{type(exc).__name__}: {exc}")
            (out / FAILURE_MARKER).write_text(f"{type(exc).__name__}: {exc}\n")
        raise
    wall = _time.perf_counter() - t_start
    if out is not None:
        write_timeseries(records, out / "timeseries.csv", model.dim)
        write_manifest(out / "manifest.txt", cfg, status="ok", dt=dt, nsteps=nsteps,
                       wall=wall)
    return RunResult(cfg, records, state, model, dt, nsteps, wall, out, written)


def configure_logging(level=logging.INFO) -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
    log.handlers[:] = [handler]
    log.setLevel(level)
    log.propagate = False
