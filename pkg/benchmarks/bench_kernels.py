"""Backend benchmark: compiled Jacobi kernel vs the numpy fallback.

Times eigh_stack on Hermitian batches at the dimensions the package
actually hits (3x3 bare S=1 sweeps, 6x6 coupled systems) plus a raw
numpy.linalg.eigh reference, and a whole-pipeline sample (one NV x VH-
crossing search).  Run as:

    python3 benchmarks/bench_kernels.py [--batch 4096] [--repeats 5]
"""

import argparse
import time

import numpy as np

from crosspeak import _kernels_py, kernels
from crosspeak.catalog import load_catalog
from crosspeak.crossings import SweepSpec, find_crossings, sweep_curves

try:
    from crosspeak import _kernels as _kernels_c
except ImportError:
    _kernels_c = None


def hermitian_stack(rng, n, d):
    a = rng.normal(size=(n, d, d)) + 1j * rng.normal(size=(n, d, d))
    h = 0.5 * (a + a.conj().transpose(0, 2, 1))
    # put the diagonal on the MHz scale the solvers actually see
    h += 2870.0 * np.eye(d)[None]
    return h


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def check_agreement(h):
    vals_py, _ = _kernels_py.eigh_stack(h, compute_vectors=False)
    if _kernels_c is None:
        return 0.0
    vals_c, _ = _kernels_c.eigh_stack(h, compute_vectors=False)
    return float(np.max(np.abs(vals_c - vals_py)))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--batch", type=int, default=4096)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    print(f"active backend: {kernels.BACKEND}")
    if _kernels_c is None:
        print("compiled kernel not importable; timing the fallback only")
    print(f"batch {args.batch}, best of {args.repeats}\n")

    header = f"{'case':<26}{'numpy (ms)':>12}{'python (ms)':>13}{'cython (ms)':>13}"
    print(header)
    print("-" * len(header))
    for d in (3, 6, 8):
        h = hermitian_stack(rng, args.batch, d)
        t_np = best_of(lambda: np.linalg.eigh(h), args.repeats)
        t_py = best_of(lambda: _kernels_py.eigh_stack(h), args.repeats)
        if _kernels_c is not None:
            t_c = best_of(lambda: _kernels_c.eigh_stack(h), args.repeats)
            c_cell = f"{1e3 * t_c:13.2f}"
            dev = check_agreement(h)
        else:
            c_cell, dev = f"{'-':>13}", 0.0
        print(f"{f'eigh_stack d={d}':<26}{1e3 * t_np:12.2f}{1e3 * t_py:13.2f}{c_cell}")
        if _kernels_c is not None and dev > 1e-8:
            print(f"  WARNING: backend eigenvalue deviation {dev:.2e} MHz")

    catalog = load_catalog()
    sweep = SweepSpec(
        axis=np.array([1.0, 0.0, 0.0]), b_min=15.0, b_max=145.0, step=0.1
    )

    def crossing_search():
        find_crossings(
            sweep_curves(catalog["NV"], sweep), sweep_curves(catalog["VH-"], sweep)
        )

    t = best_of(crossing_search, args.repeats)
    print(f"\nNV x VH- crossing search (step 0.1 G): {1e3 * t:.1f} ms")


if __name__ == "__main__":
    main()
