"""Compare the compiled RK4 transport kernel with the numpy fallback.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5] [--steps 4096]

Prints wall-clock medians per backend, the speed-up, and the largest
difference between the two results (they implement the same arithmetic).
"""
from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from caldet import _kernels_py
from caldet.operators import compose, factor_preset, hat_system

try:
    from caldet import _kernels
except ImportError:  # extension not built
    _kernels = None


def _case(name: str, lam: complex, steps: int):
    factors = []
    for part in name.split("*"):
        factors.extend(factor_preset(part))
    op = compose(factors)
    m0, fb = hat_system(op, lam).samples(steps)
    return np.ascontiguousarray(m0), np.ascontiguousarray(fb)


def _time(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--steps", type=int, default=4096)
    args = ap.parse_args(argv)
    cases = [("twisted_dirac(0)", 100j), ("laplace_dirichlet_pair", -1000.0),
             ("twisted_dirac(0.3)*twisted_dirac(0)*d_du", -50.0)]
    print(f"{'operator':45s} {'store':>5s} {'python [ms]':>12s} {'compiled [ms]':>14s} "
          f"{'speed-up':>9s} {'max diff':>10s}")
    for name, lam in cases:
        m0, fb = _case(name, lam, args.steps)
        h = 1.0 / args.steps
        for store in (True, False):
            run_py = lambda: _kernels_py.rk4_transport(m0, fb, lam, h, store)
            t_py = _time(run_py, args.repeat)
            if _kernels is None:
                print(f"{name:45s} {str(store):>5s} {1e3 * t_py:12.2f} {'n/a':>14s}")
                continue
            run_c = lambda: _kernels.rk4_transport(m0, fb, lam, h, store)
            t_c = _time(run_c, args.repeat)
            a, b = run_py(), run_c()
            if not store:
                a = np.ldexp(1.0, a[1]) * a[0]
                b = np.ldexp(1.0, b[1]) * b[0]
            diff = float(np.max(np.abs(np.asarray(a) - np.asarray(b))) / np.max(np.abs(a)))
            print(f"{name:45s} {str(store):>5s} {1e3 * t_py:12.2f} {1e3 * t_c:14.2f} "
                  f"{t_py / t_c:9.1f} {diff:10.1e}")


if __name__ == "__main__":
    main()
