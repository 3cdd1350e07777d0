"""Time the compiled kernels against the NumPy fallback.

Run from the repository root after building the extension::

    python3 benchmarks/bench_kernels.py [--repeat 5]

Each row reports the best wall time per call for both backends and the
speed-up. Inputs match the sizes used by the experiments (n = 100).
"""

import argparse
import time

import numpy as np

from mhdm import _backend, linops


def _cases(rng):
    n = 100
    T = linops.make_gaussian_conv(n, 0.025)
    gram = np.ascontiguousarray(T.gram)
    f = T.apply(rng.standard_normal(n))
    b = T.adjoint(f)
    lam = 10.0
    step = 1.0 / (lam * T.norm**2)
    y = rng.standard_normal(n) * 3
    tv = np.repeat(rng.standard_normal(5), 20) + 0.05 * rng.standard_normal(n)
    chol = np.linalg.cholesky(lam * gram + np.eye(n) / 0.495)
    zeros = np.zeros(n)
    return [
        ("lambertw0 (n=10000)", "lambertw0", (rng.uniform(-0.36, 100, 10000),)),
        ("prox_entropy (n=10000)", "prox_entropy", (rng.standard_normal(10000), 5.0)),
        ("prox_power_p (n=1000)", "prox_power_p", (rng.standard_normal(1000) * 3, 0.5, 0.5)),
        ("fista_l1 (500 it)", "fista_l1", (gram, b, lam, step, zeros, zeros, 0.0, 500, 0.0)),
        ("pg_lp (200 it)", "pg_lp", (gram, b, lam, step, 0.5, b.copy(), 200, 0.0)),
        ("cp_tv_denoise (2000 it)", "cp_tv_denoise",
         (tv, 20.0, 0.01, zeros, np.zeros(n - 1), 0.495, 0.495, 2000, 0.0)),
        ("cp_tv_general (500 it)", "cp_tv_general",
         (chol, lam * b, 0.01, zeros, np.zeros(n - 1), 0.495, 0.495, 500, 0.0)),
    ]


def _best(fn, args, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if "cython" not in _backend.available():
        print("compiled kernels are not built; only the fallback is available")
        return 1
    py, cy = _backend.get("python"), _backend.get("cython")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<26}{'python [ms]':>13}{'cython [ms]':>13}{'speed-up':>10}")
    for label, name, call_args in _cases(rng):
        tp = _best(getattr(py, name), call_args, args.repeat)
        tc = _best(getattr(cy, name), call_args, args.repeat)
        print(f"{label:<26}{1e3 * tp:>13.3f}{1e3 * tc:>13.3f}{tp / tc:>9.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
