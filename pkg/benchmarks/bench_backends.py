#!/usr/bin/env python3
"""Benchmark the compiled Monte Carlo core against the numpy fallback.

Times the two hot kernels on identical inputs:

* moment accumulation (A^T Q A / A^T / A^T Q B / A^T Q C sums over draws)
* multistep predictions + interpolating-input solves (the per-run loop of
  the controller experiment)

Usage: python benchmarks/bench_backends.py [--samples N] [--memory M]
       [--horizon T] [--repeats R]
"""

import argparse
import time

import numpy as np

from bayesmpc import _mckernels_py as py_impl

try:
    from bayesmpc import _mckernels as cy_impl
except ImportError:
    cy_impl = None


def _time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_case(samples, memory, horizon, repeats):
    rng = np.random.default_rng(0)
    thetas = rng.standard_normal((samples, 2 * memory))
    q = np.eye(horizon)
    u = rng.standard_normal((samples, horizon))
    y_ref = rng.standard_normal(horizon)
    y_past = rng.standard_normal(memory)
    u_past = rng.standard_normal(max(memory - 1, 0))

    cases = {
        "moment sums": lambda impl: impl.moment_sums(thetas, q, horizon),
        "predictions": lambda impl: impl.multistep_predictions(thetas, u, y_past, u_past),
        "oracle solves": lambda impl: impl.oracle_inputs(thetas, y_ref, y_past, u_past, 1e-12),
    }
    rows = []
    for name, fn in cases.items():
        t_py = _time(lambda: fn(py_impl), repeats)
        if cy_impl is not None:
            t_cy = _time(lambda: fn(cy_impl), repeats)
            ref = fn(py_impl)
            got = fn(cy_impl)
            if not isinstance(ref, tuple):
                ref, got = (ref,), (got,)
            ok = all(
                np.allclose(np.asarray(a), np.asarray(b), rtol=1e-9, atol=1e-9)
                for a, b in zip(ref, got)
            )
            rows.append((name, t_py, t_cy, t_py / t_cy, ok))
        else:
            rows.append((name, t_py, None, None, True))
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--samples", type=int, default=1_000_000)
    parser.add_argument("--memory", type=int, default=1)
    parser.add_argument("--horizon", type=int, default=2)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    print(f"samples={args.samples}  memory={args.memory}  horizon={args.horizon}")
    if cy_impl is None:
        print("compiled core not built; timing the numpy fallback only")
    header = f"{'kernel':<14} {'numpy [s]':>10} {'compiled [s]':>13} {'speedup':>8}  agree"
    print(header)
    print("-" * len(header))
    for name, t_py, t_cy, speedup, ok in bench_case(
        args.samples, args.memory, args.horizon, args.repeats
    ):
        if t_cy is None:
            print(f"{name:<14} {t_py:>10.4f} {'-':>13} {'-':>8}")
        else:
            print(f"{name:<14} {t_py:>10.4f} {t_cy:>13.4f} {speedup:>7.1f}x  {ok}")


if __name__ == "__main__":
    main()
