"""Rebuild the golden fixtures in this directory.

    python3 tests/fixtures/regenerate.py [bump] [2d]

``bump`` reruns bump-on-tail to t=30 (under a minute) and stores the density
snapshot; ``2d`` reruns the 2D2V weak Landau preset (about 20 minutes on one
core) and stores its time series, whose rank columns are the golden rank
trajectory.  Only regenerate after a deliberate change to the numerics, and
say why in the commit message.
"""

import shutil
import sys
import tempfile
from pathlib import Path

from conslr.config import make_config
from conslr.simulation import configure_logging, run_simulation

HERE = Path(__file__).parent
BUMP_T = 30.0


def bump() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        cfg = make_config("bump_on_tail", t_end=BUMP_T, snapshot_times=(BUMP_T,))
        res = run_simulation(cfg, tmp)
        shutil.copy(res.snapshots[0], HERE / "bump_on_tail_t30.csv")


def weak_landau_2d() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        run_simulation(make_config("weak_landau_2d", log_every=50), tmp)
        shutil.copy(Path(tmp) / "timeseries.csv", HERE / "weak_landau_2d_ranks.csv")


if __name__ == "__main__":
    configure_logging()
    which = sys.argv[1:] or ["bump", "2d"]
    if "bump" in which:
        bump()
    if "2d" in which:
        weak_landau_2d()
