"""Time the compiled kernels against the pure-Python fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import time

import numpy as np

from topocrit import _fallback, kernels
from topocrit.effective import permutation_luts
from topocrit.lattice import build_lattice


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases():
    lat = build_lattice("kitaev_square", 2, 9)
    perm = lat.x_check_translation()
    luts = permutation_luts(perm, lat.n_translations)
    flip = np.uint64(lat.x_dependencies[0])
    n = len(perm)
    masks = np.array([1 << k for k in range(n)], dtype=np.uint64)
    reps, orbit = _fallback.symmetric_representatives(n, luts, flip)
    table = _fallback.symmetric_neighbors(reps, luts, flip, masks)
    sq = np.sqrt(orbit.astype(float))
    rng = np.random.default_rng(0)
    diag = rng.normal(size=reps.size)
    x = rng.normal(size=reps.size)
    out = np.empty_like(x)
    L = 32
    bonds = np.arange(L, dtype=np.int64)
    qmc_args = (L, bonds, (bonds + 1) % L, np.ones(L), 1.0, 64.0, 0, 20, 7)
    return {
        "symmetric_representatives (18 spins)":
            lambda m: m.symmetric_representatives(n, luts, flip),
        "symmetric_neighbors (18 spins)":
            lambda m: m.symmetric_neighbors(reps, luts, flip, masks),
        "symmetric_matvec (18 spins)":
            lambda m: m.symmetric_matvec(diag, sq, table, -1.0, x, out),
        "qmc_simulate (chain L=32, 20 sweeps)":
            lambda m: m.qmc_simulate(*qmc_args),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if not kernels.compiled_available():
        print("compiled kernels not built; only the fallback is timed")
    core = kernels.backend("compiled") if kernels.compiled_available() else None
    print(f"{'kernel':40s} {'python [s]':>12s} {'compiled [s]':>13s} {'speedup':>8s}")
    for name, fn in cases().items():
        tp = best_of(lambda: fn(_fallback), args.repeat)
        if core is None:
            print(f"{name:40s} {tp:12.4g} {'-':>13s} {'-':>8s}")
            continue
        tc = best_of(lambda: fn(core), args.repeat)
        print(f"{name:40s} {tp:12.4g} {tc:13.4g} {tp / tc:8.1f}")


if __name__ == "__main__":
    main()
