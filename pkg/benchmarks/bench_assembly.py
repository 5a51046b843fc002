"""Time fiber assembly with the compiled kernel against the numpy fallback.

    python3 benchmarks/bench_assembly.py [--repeat 5]
"""
import argparse
import time

import numpy as np

from blochhom import kernels
from blochhom.fiber import PlaneWaveBasis, coefficient_table
from blochhom.torus import load_coefficient

CASES = [
    ("laminate d=1 N=64", {"dim": 1, "kind": "laminate", "n_per_axis": 129,
                           "payload": {"values": [1, 4], "fraction": 0.5}}, 64),
    ("trig d=2 N=8", {"dim": 2, "kind": "trig", "n_per_axis": 33,
                      "payload": {"scalar": [{"c": 2.0}, {"c": 1.0, "f": ["sin:1", "sin:1"]}]}}, 8),
    ("trig d=2 N=16", {"dim": 2, "kind": "trig", "n_per_axis": 65,
                       "payload": {"scalar": [{"c": 2.0}, {"c": 1.0, "f": ["sin:1", "sin:1"]}]}}, 16),
]


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    print(f"compiled kernel available: {kernels.BACKEND == 'compiled'}")
    print(f"{'case':<20}{'P':>6}{'compiled [ms]':>16}{'numpy [ms]':>14}{'speedup':>10}{'max diff':>12}")
    for label, desc, N in CASES:
        A = load_coefficient(desc)
        basis = PlaneWaveBasis.create(A.d, N)
        k = basis.index + 0.25
        args_ = (k, k, coefficient_table(A), A.grid.n_per_axis, basis.index)
        t_fast = best_of(lambda: kernels.toeplitz_form(*args_), args.repeat)
        t_slow = best_of(lambda: kernels.python_toeplitz_form(*args_), args.repeat)
        diff = np.abs(kernels.toeplitz_form(*args_) - kernels.python_toeplitz_form(*args_)).max()
        print(f"{label:<20}{basis.size:>6}{1e3 * t_fast:>16.2f}{1e3 * t_slow:>14.2f}"
              f"{t_slow / t_fast:>10.1f}{diff:>12.1e}")


if __name__ == "__main__":
    main()
