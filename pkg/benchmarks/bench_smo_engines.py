#!/usr/bin/env python3
"""Benchmark the numba SMO engine against the pure-numpy fallback.

The SMO inner loop is the package's hot kernel (one SVM solve per MKL
iteration). This script times both engines on identical seeded problems
and checks that they agree. Run after `pip install -e .`:

    python3 benchmarks/bench_smo_engines.py --sizes 200,500,1000 --repeats 3

Force the fallback everywhere else with NEWSMKL_DISABLE_NUMBA=1.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from newsmkl._smo import get_engine
from newsmkl.kernels import KernelSpec, gram_matrix, median_sqdist


def make_problem(seed: int, l: int, C: float):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((l, 10))
    w = rng.standard_normal(10)
    y = np.where(X @ w + 0.2 * rng.standard_normal(l) >= 0, 1.0, -1.0)
    if abs(y.sum()) == l:
        y[: l // 2] = -y[0]
    K = gram_matrix(KernelSpec(kind="gaussian", sigma=median_sqdist(X)), X).values
    Q = np.ascontiguousarray((y[:, None] * y[None, :]) * K)
    return Q, y


def run_engine(engine_name: str, Q, y, C: float, tol: float):
    fn = get_engine(engine_name)
    alpha = np.zeros(y.shape[0])
    grad = -np.ones(y.shape[0])
    t0 = time.perf_counter()
    n_iter, violation, converged = fn(Q, y, alpha, grad, C, tol, 10_000_000)
    elapsed = time.perf_counter() - t0
    obj = 0.5 * (float(alpha.sum()) - float(alpha @ grad))
    return elapsed, n_iter, obj, converged


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="200,500,1000")
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--C", type=float, default=10.0)
    ap.add_argument("--tol", type=float, default=1e-4)
    args = ap.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    try:
        get_engine("numba")
        engines = ["numba", "numpy"]
    except RuntimeError:
        print("numba engine unavailable (NEWSMKL_DISABLE_NUMBA set or numba missing); timing numpy only")
        engines = ["numpy"]

    # JIT warmup so compilation does not pollute the first measurement
    Qw, yw = make_problem(args.seed, 50, args.C)
    for e in engines:
        run_engine(e, Qw, yw, args.C, args.tol)

    print(f"{'size':>6} {'engine':>7} {'median_s':>10} {'iters':>8} {'objective':>14}")
    for l in sizes:
        Q, y = make_problem(args.seed + l, l, args.C)
        objs = {}
        medians = {}
        for e in engines:
            times = []
            for _ in range(args.repeats):
                elapsed, n_iter, obj, converged = run_engine(e, Q, y, args.C, args.tol)
                times.append(elapsed)
                if not converged:
                    print(f"  warning: {e} did not converge at l={l}")
            medians[e] = float(np.median(times))
            objs[e] = obj
            print(f"{l:>6} {e:>7} {medians[e]:>10.4f} {n_iter:>8} {obj:>14.6f}")
        if len(engines) == 2:
            agree = abs(objs["numba"] - objs["numpy"]) <= 1e-9 * max(1.0, abs(objs["numpy"]))
            print(f"{'':>6} speedup numba vs numpy: {medians['numpy'] / max(medians['numba'], 1e-12):.1f}x"
                  f"  | objectives agree: {agree}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
