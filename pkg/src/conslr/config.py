"""Run configuration: code-defined presets, a flat ``key = value`` file format
and ``key=val`` command-line overrides.

Unknown keys, unparsable values and constraint violations all raise
:class:`ConfigError` naming the offending key.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterable

PROBLEMS_1D = ("weak_landau_1d", "strong_landau_1d", "bump_on_tail")
PROBLEMS_2D = ("weak_landau_2d", "two_stream_2d")
PROBLEMS = PROBLEMS_1D + PROBLEMS_2D


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SimulationConfig:
    problem: str = "weak_landau_1d"
    nx: int = 64
    nv: int = 128
    k: float = 0.5
    alpha: float = 0.01
    v_max: float = 6.0
    v0: float = 2.4
    n_p: float = 0.0
    n_b: float = 0.0
    u: float = 4.5
    v_t: float = 0.5
    eps: float = 1e-5
    mode: str = "conservative"
    level: int = 3
    weight_sigma: float = 1.0
    v_boundary: str = "noflux"
    cfl: float = 0.3
    e_bound: float = 1.0
    t_end: float = 40.0
    integrator: str = "sspml2"
    output_every: int = 1
    log_every: int = 100
    snapshot_times: tuple = ()
    slice_index: tuple = (0, 0)
    rank_ceiling: int = 300
    outdir: str = "out"

    @property
    def dim(self) -> int:
        return 2 if self.problem in PROBLEMS_2D else 1

    @property
    def length(self) -> float:
        return 2.0 * math.pi / self.k

    @property
    def momentum_relative(self) -> bool:
        """Asymmetric problems report relative momentum deviation, symmetric ones absolute."""
        return self.problem == "bump_on_tail"


_SQ2PI = math.sqrt(2.0 * math.pi)

PRESETS: dict[str, dict] = {
    "weak_landau_1d": dict(nx=64, nv=128, k=0.5, alpha=0.01, v_max=6.0, eps=1e-5,
                           t_end=40.0),
    "strong_landau_1d": dict(nx=64, nv=128, k=0.5, alpha=0.5, v_max=6.0, eps=1e-3,
                             t_end=40.0),
    "bump_on_tail": dict(nx=64, nv=128, k=0.3, alpha=0.04, v_max=8.0,
                         n_p=9.0 / (10.0 * _SQ2PI), n_b=2.0 / (10.0 * _SQ2PI),
                         u=4.5, v_t=0.5, eps=1e-4, weight_sigma=math.sqrt(1.5),
                         t_end=40.0),
    "weak_landau_2d": dict(nx=32, nv=64, k=0.5, alpha=0.01, v_max=6.0, eps=1e-5,
                           t_end=20.0),
    "two_stream_2d": dict(nx=32, nv=64, k=0.2, alpha=0.001, v0=2.4, v_max=8.0,
                          eps=1e-5, t_end=40.0),
}

_FIELDS = {f.name: f for f in fields(SimulationConfig)}


def _parse_value(key: str, raw):
    ftype = _FIELDS[key].type
    if not isinstance(raw, str):
        return raw
    raw = raw.strip()
    try:
        if ftype == "int":
            return int(raw)
        if ftype == "float":
            return float(raw)
        if ftype == "tuple":
            if key == "slice_index":
                return tuple(int(p) for p in raw.split(",") if p.strip())
            return tuple(float(p) for p in raw.split(",") if p.strip())
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {ftype}") from None
    return raw


def _check(cfg: SimulationConfig) -> SimulationConfig:
    def bad(key, why):
        raise ConfigError(f"{key}: {why} (got {getattr(cfg, key)!r})")

    for f in fields(cfg):
        val = getattr(cfg, f.name)
        if f.type == "int" and (isinstance(val, bool) or not isinstance(val, int)):
            bad(f.name, "expected an integer")
        if f.type == "float" and (isinstance(val, bool) or not isinstance(val, (int, float))):
            bad(f.name, "expected a number")
        if f.type == "str" and not isinstance(val, str):
            bad(f.name, "expected a string")
    if cfg.problem not in PROBLEMS:
        bad("problem", f"must be one of {', '.join(PROBLEMS)}")
    for key in ("nx", "nv"):
        if getattr(cfg, key) < 8:
            bad(key, "needs at least 8 points")
    for key in ("k", "v_max", "eps", "weight_sigma", "cfl", "e_bound", "v_t"):
        if not getattr(cfg, key) > 0:
            bad(key, "must be positive")
    for key in ("alpha", "n_p", "n_b", "t_end"):
        if getattr(cfg, key) < 0:
            bad(key, "must be non-negative")
    if cfg.mode not in ("conservative", "plain"):
        bad("mode", "must be 'conservative' or 'plain'")
    if cfg.v_boundary not in ("noflux", "zero"):
        bad("v_boundary", "must be 'noflux' or 'zero'")
    if cfg.level not in (1, 2, 3):
        bad("level", "must be 1, 2 or 3")
    if cfg.integrator not in ("sspml2", "euler"):
        bad("integrator", "must be 'sspml2' or 'euler'")
    if cfg.output_every < 1:
        bad("output_every", "must be at least 1")
    if cfg.log_every < 0:
        bad("log_every", "must be non-negative")
    if cfg.rank_ceiling < 1:
        bad("rank_ceiling", "must be at least 1")
    if len(cfg.slice_index) != 2:
        bad("slice_index", "needs two indices")
    if any(t < 0 for t in cfg.snapshot_times):
        bad("snapshot_times", "must be non-negative")
    return cfg


def make_config(problem: str | None = None, **overrides) -> SimulationConfig:
    """Preset defaults for ``problem`` with keyword overrides applied."""
    unknown = set(overrides) - set(_FIELDS)
    if unknown:
        raise ConfigError(f"{sorted(unknown)[0]}: unknown key")
    problem = problem or overrides.pop("problem", "weak_landau_1d")
    overrides.pop("problem", None)
    if problem not in PRESETS:
        raise ConfigError(f"problem: unknown preset {problem!r}")
    values = dict(PRESETS[problem])
    values.update({k: _parse_value(k, v) for k, v in overrides.items()})
    return _check(SimulationConfig(problem=problem, **values))


def parse_pairs(lines: Iterable[str]) -> dict[str, str]:
    out = {}
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected 'key = value', got {line!r}")
        key, val = (p.strip() for p in line.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError(f"{key}: unknown key")
        out[key] = val
    return out


def parse_config(path=None, overrides: Iterable[str] = ()) -> SimulationConfig:
    """Read ``path`` (may be ``None``) then apply ``key=val`` overrides."""
    values: dict[str, str] = {}
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError(f"{p}: {exc.strerror}") from exc
        values.update(parse_pairs(text.splitlines()))
    values.update(parse_pairs(overrides))
    problem = values.pop("problem", "weak_landau_1d")
    return make_config(problem, **values)


def _format(val) -> str:
    if isinstance(val, tuple):
        return ",".join(repr(v) for v in val)
    if isinstance(val, float):
        return repr(val)
    return str(val)


def serialize(cfg: SimulationConfig) -> str:
    return "".join(f"{f.name} = {_format(getattr(cfg, f.name))}\n" for f in fields(cfg))


def replace(cfg: SimulationConfig, **changes) -> SimulationConfig:
    unknown = set(changes) - set(_FIELDS)
    if unknown:
        raise ConfigError(f"{sorted(unknown)[0]}: unknown key")
    return _check(dataclasses.replace(cfg, **changes))
