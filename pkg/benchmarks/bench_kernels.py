#!/usr/bin/env python3
"""Timing comparison of the compiled extension vs the pure-numpy fallback.

Runs the three hot kernels (backward Volterra solve, binomial-tree value
iteration, Monte Carlo paths) on both backends and prints a table.  Use
--quick for a faster, smaller sweep.
"""

import argparse
import math
import time

import numpy as np

from anscombe._kernels import get_backend
from anscombe.normal_conjugate import make_s_grid
from anscombe.volterra import SolverConfig, make_r_grid


def time_call(fn, *args, repeat=1):
    best = math.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true")
    args = ap.parse_args()

    k = 300 if args.quick else 800
    tree_dr = 2e-4 if args.quick else 5e-5
    n_paths = 2000 if args.quick else 20000

    pts = np.array([1.0, -1.0])
    wts = np.array([0.5, 0.5])
    rgrid = make_r_grid(SolverConfig(k=k))
    sgrid = make_s_grid(k, -100.0)

    dy = math.sqrt(tree_dr)
    n_slices = int(round(0.95 / tree_dr))
    times = 1.0 - tree_dr * np.arange(n_slices + 1)
    tf = 1.0 - times
    half = int(math.ceil(6.0 / dy))
    y = (np.arange(2 * half + 1) - half) * dy
    E = np.exp(np.outer(pts, y))

    n_steps = 2000
    upper = np.full(n_steps + 1, 0.6)
    lower = np.full(n_steps + 1, -0.6)
    cum = np.array([0.5, 1.0])

    jobs = [
        ("volterra symmetric solve", "solve_symmetric_grid",
         (pts, wts, rgrid, 1e-10)),
        ("standardized solve", "solve_c_grid_symmetric", (sgrid, 1e-10)),
        ("tree value iteration", "tree_mixture",
         (pts, wts, E, 0.0, times, tf, y, dy, False, 1e-12, False)),
        ("monte carlo paths", "mc_chunk",
         (0, 0, pts, wts, cum, 0.0, 0.0, 0, 0.0, 0.0, upper, lower,
          5e-4, n_steps, 7, 0, n_paths)),
        ("discounted ou paths", "ou_chunk",
         (0.76, 3.0, 5e-4, 20000, 7, 0, n_paths)),
    ]

    backends = {}
    for name in ("fallback", "compiled"):
        try:
            backends[name] = get_backend(name)
        except ImportError:
            print(f"note: {name} backend unavailable")

    width = max(len(label) for label, _, _ in jobs)
    header = f"{'kernel':<{width}}  " + "".join(f"{n:>12}" for n in backends) + "    speedup"
    print(header)
    print("-" * len(header))
    for label, fname, fargs in jobs:
        timings = {}
        results = {}
        for bname, mod in backends.items():
            timings[bname], results[bname] = time_call(getattr(mod, fname), *fargs)
        row = f"{label:<{width}}  " + "".join(f"{timings[n]:>11.3f}s" for n in backends)
        if len(timings) == 2:
            row += f"    {timings['fallback'] / timings['compiled']:>6.1f}x"
            if fname in ("mc_chunk", "ou_chunk", "tree_mixture"):
                a, b = results["fallback"], results["compiled"]
                same = (
                    np.array_equal(a[0], b[0])
                    if isinstance(a, tuple) and hasattr(a[0], "shape")
                    else a == b
                )
                row += "  (bit-identical)" if same else "  (MISMATCH!)"
        print(row)


if __name__ == "__main__":
    main()
