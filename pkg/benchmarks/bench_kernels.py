"""Time the RK4 kernels with and without numba.

    python benchmarks/bench_kernels.py [--steps N]

For each kernel the first call (which includes JIT compilation unless the
on-disk cache is warm) and a repeat call are timed separately.  The
generated vector-field module goes to a fresh cache directory so its
compile cost is always cold.
"""
import argparse
import os
import tempfile
import time

import numpy as np

os.environ["JETREDUCE_CACHE"] = tempfile.mkdtemp(prefix="jr_bench_")

from jetreduce import accel  # noqa: E402
from jetreduce import nwaves as nw  # noqa: E402
from jetreduce.cli import parse_expr  # noqa: E402
from jetreduce.painleve_numeric import integrate, t_flow  # noqa: E402
from jetreduce.reduce_h import EvolutionPDE, reduce_scalar  # noqa: E402


def timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return time.perf_counter() - t0, out


def bench_rk4(steps):
    red = reduce_scalar(parse_expr("u^3 + (1/2)*u_x^2 + 2*x*u + 6*t*u^2"),
                        EvolutionPDE.scalar("u", parse_expr("6*u*u_x - u_xxx")))
    h = 0.2 / steps
    rows = {}
    for flag in ("0", "1"):
        os.environ["JETREDUCE_NUMBA"] = flag
        sys = t_flow(red, 0.0)
        first, (_, Y) = timed(lambda: integrate(sys, [-4.0, 1 / 6], 1.0, 1.2, h))
        again, (_, Y2) = timed(lambda: integrate(sys, [-4.0, 1 / 6], 1.0, 1.2, h))
        rows[flag] = (first, again, Y2[-1])
    return rows


def bench_nwaves(steps):
    s = nw.LaxState.random(4, np.random.default_rng(0))
    lo, hi = nw.clear_window(s, 0)
    span = 0.9 * (hi - s.times[0]) if hi > s.times[0] else -0.9 * (s.times[0] - lo)
    h = abs(span) / steps
    rows = {}
    for flag in ("0", "1"):
        os.environ["JETREDUCE_NUMBA"] = flag
        first, _ = timed(lambda: nw.advance(s, 0, span, h))
        again, end = timed(lambda: nw.advance(s, 0, span, h))
        rows[flag] = (first, again, end.q)
    return rows


def show(title, rows, steps):
    print(f"{title} ({steps} steps)")
    for flag, name in (("0", "python"), ("1", "numba")):
        first, again, _ = rows[flag]
        print(f"  {name:7s} first {first:8.3f} s   repeat {again:8.3f} s   {steps / again:12.0f} steps/s")
    gap = np.max(np.abs(np.asarray(rows["0"][2]) - np.asarray(rows["1"][2])))
    print(f"  max |python - numba| = {gap:.2e}")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=200_000)
    args = ap.parse_args()
    if not accel.numba_available():
        print("numba is not installed; only the python kernels exist")
        return
    show("RK4, PI t-flow", bench_rk4(args.steps), args.steps)
    show("RK4, n-waves n=4", bench_nwaves(args.steps // 10), args.steps // 10)


if __name__ == "__main__":
    main()
