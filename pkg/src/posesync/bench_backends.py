"""Benchmark the numba-JIT kernels against the pure-numpy fallback.

Run as ``python -m posesync.bench_backends``.  Times the potential-gradient
kernel and the fused sweep loop on synthetic problems of a few sizes and
prints per-backend timings with speedups.  Numbers are medians over
repeats; the JIT is warmed up before timing.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
import time

import numpy as np

from . import kernels, synth
from .baselines import mst_propagate
from .model import ModelParams


def _median_time(fn, repeats: int) -> float:
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def _bench_case(n: int, completeness: float, sweeps: int, repeats: int) -> list[dict]:
    graph = synth.generate(n, completeness, noise_lambda=-350.0 * np.ones(3),
                           noise_sigma2=0.01, seed=7)
    params = ModelParams.isotropic(350.0, 0.01)
    est = mst_propagate(graph)
    ei, ej, mq, mt = graph.arrays()
    lam, inv_s2, plam, pframe, inv_ps2 = params.flat_arrays()
    q0, t0_ = est.q, est.t
    h, c = 0.004, 1000.0
    damp = math.exp(-c * h)

    def grad_args():
        return (q0.copy(), t0_.copy(), ei, ej, mq, mt, lam, inv_s2, plam, pframe, inv_ps2)

    def sweep_args():
        q = q0.copy()
        t = t0_.copy()
        vq = np.zeros((n, 4))
        vt = np.zeros((n, 3))
        trace = np.empty(sweeps)
        return (
            q, t, vq, vt, ei, ej, mq, mt, lam, inv_s2, plam, pframe, inv_ps2,
            h, damp, 0.0, np.zeros((0, n, 4)), np.zeros((0, n, 3)),
            trace, q.copy(), t.copy(), math.inf, True,
        )

    rows = []
    impls = {"numpy": (kernels.potential_grad_numpy, kernels.run_sweeps_numpy)}
    if kernels.numba_available():
        impls["numba"] = (kernels.potential_grad_numba, kernels.run_sweeps_numba)
        # Warm the JIT outside the timed region.
        kernels.potential_grad_numba(*grad_args())
        kernels.run_sweeps_numba(*sweep_args())
    for backend, (grad_fn, sweep_fn) in impls.items():
        rows.append(
            {
                "case": f"n={n} m={graph.m}",
                "backend": backend,
                "gradient_s": _median_time(lambda: grad_fn(*grad_args()), repeats),
                "sweeps_s": _median_time(lambda: sweep_fn(*sweep_args()), max(1, repeats // 2)),
                "sweeps": sweeps,
            }
        )
    return rows


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="10,30,100", help="comma-separated node counts")
    parser.add_argument("--completeness", type=float, default=0.5)
    parser.add_argument("--sweeps", type=int, default=200, help="sweeps per fused-loop timing")
    parser.add_argument("--repeats", type=int, default=7)
    parser.add_argument("--csv", default=None, help="also write rows to this CSV file")
    args = parser.parse_args(argv)

    all_rows: list[dict] = []
    for n in (int(s) for s in args.sizes.split(",")):
        all_rows.extend(_bench_case(n, args.completeness, args.sweeps, args.repeats))

    print(f"{'case':>14}  {'backend':>7}  {'gradient':>12}  {'%d sweeps' % args.sweeps:>12}  speedup")
    by_case: dict[str, dict[str, dict]] = {}
    for row in all_rows:
        by_case.setdefault(row["case"], {})[row["backend"]] = row
    for case, backends in by_case.items():
        base = backends.get("numpy")
        for backend, row in backends.items():
            speed = ""
            if backend == "numba" and base is not None:
                speed = f"{base['sweeps_s'] / row['sweeps_s']:.1f}x"
            print(
                f"{case:>14}  {backend:>7}  {row['gradient_s'] * 1e6:>10.1f}us  "
                f"{row['sweeps_s'] * 1e3:>10.2f}ms  {speed}"
            )
    if not kernels.numba_available():
        print("note: numba unavailable; only the numpy fallback was timed")
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=["case", "backend", "gradient_s", "sweeps_s", "sweeps"])
            writer.writeheader()
            writer.writerows(all_rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
