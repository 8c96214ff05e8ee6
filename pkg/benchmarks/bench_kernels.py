"""Time the Gaussian draw kernels under the numba and numpy backends.

    python3 benchmarks/bench_kernels.py --reps 2000 --n 1000
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from metamodel_mse import kernels
from metamodel_mse._accel import HAVE_NUMBA


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--reps", type=int, default=2000, help="replications per call")
    parser.add_argument("--L", type=int, default=25, help="number of conditions")
    parser.add_argument("--n", type=int, default=1000, help="total samples per replication")
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)

    m = args.n // args.L
    keys = kernels.stream_keys(20240917, np.arange(args.reps), args.L)
    mu = np.linspace(0.0, 1.0, args.L)
    draws = args.reps * args.L * m
    backends = ["numpy"] + (["numba"] if HAVE_NUMBA else [])

    results = {}
    for backend in backends:
        kernels.condition_means(keys[:2], m, mu, 1.0, backend)  # warm up / compile
        secs = best_of(lambda: kernels.condition_means(keys, m, mu, 1.0, backend), args.repeat)
        results[backend] = kernels.condition_means(keys, m, mu, 1.0, backend)
        print(f"{backend:>6}: {secs * 1e3:9.1f} ms  {secs / draws * 1e9:6.1f} ns/draw")

    if len(results) == 2:
        diff = float(np.max(np.abs(results["numba"] - results["numpy"])))
        print(f"max |numba - numpy| over {results['numpy'].size} condition means: {diff:.2e}")
    else:
        print("numba not installed; only the numpy backend was timed")


if __name__ == "__main__":
    main()
