"""Throughput of the compiled chain kernel against the numpy fallback.

    python3 benchmarks/bench_chain.py [--points N] [--repeat R]
"""

import argparse
import timeit

import numpy as np

from cvrsp import components as comp
from cvrsp._kernels import chain_covariances_c, chain_covariances_py
from cvrsp.protocol import pack_params, run_rsp, reference_params


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--points", type=int, default=900)
    parser.add_argument("--repeat", type=int, default=20)
    args = parser.parse_args()

    params = reference_params()
    packed = pack_params(params)
    gains = comp.gain_from_db(np.linspace(6.0, 18.0, args.points))
    angles = np.radians(np.linspace(-40.0, 40.0, args.points))

    kernels = {"numpy": chain_covariances_py}
    if chain_covariances_c is not None:
        kernels["cython"] = chain_covariances_c
    else:
        print("compiled kernel unavailable; timing the fallback only")

    reference = chain_covariances_py(packed, gains, angles)
    results = {}
    for name, fn in kernels.items():
        out = fn(packed, gains, angles)
        err = float(np.max(np.abs(out - reference)))
        best = min(timeit.repeat(lambda: fn(packed, gains, angles), number=1, repeat=args.repeat))
        results[name] = best
        print(f"{name:>8}: {1e6 * best / args.points:8.3f} us/point  (max |diff| vs numpy {err:.1e})")

    single = min(timeit.repeat(lambda: run_rsp(params), number=1, repeat=args.repeat))
    print(f"{'run_rsp':>8}: {1e6 * single:8.3f} us/point  (object-level reference path)")
    if "cython" in results:
        print(f"speed-up cython/numpy: {results['numpy'] / results['cython']:.1f}x")


if __name__ == "__main__":
    main()
