"""Compiled vs NumPy stencil kernels, alone and inside full time steps.

Usage::

    python3 benchmarks/bench_stencils.py [--repeat N]

The first table times the bare upwind kernel on frame-shaped arrays.  The
second times whole steps of the 1D1V and 2D2V weak Landau runs with each
backend and reports the share of step time spent in the stencil kernel, which
is what bounds the end-to-end benefit of the compiled code.
"""

import argparse
import cProfile
import pstats
import timeit

import numpy as np

from conslr import stencils
from conslr.config import make_config
from conslr.problems import build_model, initial_condition
from conslr.simulation import policy_for, time_grid
from conslr.stepper import initial_state, step


def bench_kernel(repeat: int) -> None:
    backends = ["numpy"] + (["compiled"] if stencils._compiled is not None else [])
    print(f"{'shape':>12} {'periodic':>8} " + " ".join(f"{b + ' [us]':>14}" for b in backends)
          + f" {'speedup':>8}")
    rng = np.random.default_rng(0)
    for n, r in ((64, 8), (128, 32), (256, 64), (512, 128)):
        u = rng.standard_normal((n, r))
        for periodic in (True, False):
            times = []
            for b in backends:
                fn = stencils.upwind_apply_numpy if b == "numpy" else stencils.upwind_apply_compiled
                assert np.allclose(fn(u, True, periodic, 1.0), stencils.upwind_apply_numpy(
                    u, True, periodic, 1.0), rtol=0, atol=1e-12)
                t = min(timeit.repeat(lambda: fn(u, True, periodic, 10.0), number=200,
                                      repeat=repeat)) / 200
                times.append(t * 1e6)
            sp = f"{times[0] / times[1]:8.2f}" if len(times) == 2 else ""
            print(f"{str((n, r)):>12} {periodic!s:>8} "
                  + " ".join(f"{t:14.2f}" for t in times) + f" {sp}")


def _steps(problem, nsteps, **kw):
    cfg = make_config(problem, **kw)
    model = build_model(cfg)
    dt, _ = time_grid(cfg, model)
    st = initial_state(model, initial_condition(cfg, model.grids), dt)
    pol = policy_for(cfg)
    # warm up past the low-rank start so the timed steps see realistic ranks
    for _ in range(nsteps):
        st = step(model, st, pol)
    return model, st, pol


def bench_steps(nsteps: int) -> None:
    print(f"\n{'run':>16} {'backend':>9} {'s/step':>8} {'kernel share':>13}")
    for problem, warm, kw in (("weak_landau_1d", 100, {}),
                              ("weak_landau_2d", 20, {"nx": 32, "nv": 32})):
        for b in ("numpy", "compiled"):
            if b == "compiled" and stencils._compiled is None:
                continue
            stencils.set_backend(b)
            model, st, pol = _steps(problem, warm, **kw)
            prof = cProfile.Profile()
            prof.enable()
            t = timeit.timeit(lambda: step(model, st, pol), number=nsteps) / nsteps
            prof.disable()
            stats = pstats.Stats(prof)
            kern = sum(v[3] for k, v in stats.stats.items()
                       if k[2] in ("upwind_apply_numpy", "upwind_apply_compiled"))
            share = kern / (t * nsteps)
            print(f"{problem:>16} {b:>9} {t:8.4f} {100 * share:12.1f}%")
    stencils.set_backend("compiled" if stencils._compiled is not None else "numpy")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--steps", type=int, default=10)
    args = ap.parse_args()
    print(f"active backend at import: {stencils.BACKEND}\n")
    bench_kernel(args.repeat)
    bench_steps(args.steps)


if __name__ == "__main__":
    main()
