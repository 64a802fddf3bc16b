"""Command line: ``conslr solve <config> [--override key=val]... [--compare] [--outdir DIR]``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import config as cfgmod
from .simulation import configure_logging, run_simulation

log = logging.getLogger("conslr")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="conslr",
                                description="Conservative low-rank Vlasov-Poisson solver")
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("solve", help="run one configuration")
    s.add_argument("config", help="key = value file; a preset name is also accepted")
    s.add_argument("--override", "-o", action="append", default=[], metavar="KEY=VAL")
    s.add_argument("--compare", action="store_true",
                   help="run conservative and plain truncation back to back")
    s.add_argument("--outdir", default=None)
    s.add_argument("--quiet", "-q", action="store_true")
    return p


def _load(spec: str, overrides) -> cfgmod.SimulationConfig:
    if spec in cfgmod.PRESETS and not Path(spec).exists():
        return cfgmod.parse_config(None, [f"problem={spec}", *overrides])
    return cfgmod.parse_config(spec, overrides)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    configure_logging(logging.WARNING if args.quiet else logging.INFO)
    try:
        cfg = _load(args.config, args.override)
    except cfgmod.ConfigError as exc:
        print(f"conslr: config error: {exc}", file=sys.stderr)
        return 2
    outdir = Path(args.outdir or cfg.outdir)
    runs = [(cfg, outdir)]
    if args.compare:
        runs = [(cfgmod.replace(cfg, mode=m), outdir / m) for m in ("conservative", "plain")]
    for c, d in runs:
        try:
            res = run_simulation(c, d)
        except Exception as exc:  # reported, not re-raised: the CLI exits nonzero
            print(f"conslr: run aborted ({c.mode}): {type(exc).__name__}: {exc}",
                  file=sys.stderr)
            return 1
        last = res.records[-1]
        log.info("%s done in %.1fs: mass_dev=%.3e energy_dev=%.3e -> %s", c.mode,
                 res.wall_time, last.mass_dev, last.energy_dev, d)
    return 0


if __name__ == "__main__":
    sys.exit(main())
