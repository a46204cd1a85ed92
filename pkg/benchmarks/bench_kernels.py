"""Timing of the numba kernels against their numpy fallbacks.

Run with ``python3 benchmarks/bench_kernels.py [--repeat N]``.  Each kernel
is called once before timing so that numba compilation is excluded.
"""

import argparse
import time

import numpy as np

from dephaselab import kernels
from dephaselab.model import expm_hermitian, random_density, random_hermitian


def _best(func, args, repeat):
    func(*args)
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        func(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def cases(rng):
    m, d, n = 3, 2, 4
    U = np.stack([[expm_hermitian(random_hermitian(rng, n), -0.7) for _ in range(d)] for _ in range(m)])
    Uh = np.ascontiguousarray(np.conj(np.swapaxes(U, -1, -2)))
    yield "bath_chain d=2 n=4 m=3", (np.ascontiguousarray(U), Uh, random_density(rng, n).astype(complex))
    h = rng.normal(size=(2, 100_000))
    w = np.full(100_000, 1e-5)
    yield "diag_chain d=2 N=1e5 m=2", (h, w, np.array([1.0, 1.0]))
    X = rng.normal(size=(3, 3, 3)) + 1j * rng.normal(size=(3, 3, 3))
    Y = rng.normal(size=(3, 3, 3)) + 1j * rng.normal(size=(3, 3, 3))
    yield "expansion_coefficients d=3 m=3", (random_density(rng, 3).astype(complex), X, Y)
    omega = np.linspace(-50, 50, 20_000)
    yield "one_minus_cos_over_sq N=2e4", (omega, 1.3)
    fj = rng.normal(size=(3, 20_000)) + 0j
    fl = rng.normal(size=(3, 20_000)) + 0j
    yield "gsb_log_density m=3 N=2e4", (omega, fj, fl, np.array([0.0, 0.5, 1.2, 2.0]))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    print(f"{'kernel':36s} {'numpy [ms]':>12s} {'numba [ms]':>12s} {'speedup':>8s}")
    for label, inputs in cases(rng):
        base = label.split()[0]
        t_np = _best(getattr(kernels, f"{base}_numpy"), inputs, args.repeat)
        t_nb = _best(getattr(kernels, f"{base}_numba"), inputs, args.repeat)
        a = getattr(kernels, f"{base}_numpy")(*inputs)
        b = getattr(kernels, f"{base}_numba")(*inputs)
        assert np.abs(np.asarray(a) - np.asarray(b)).max() < 1e-9, label
        print(f"{label:36s} {1e3 * t_np:12.3f} {1e3 * t_nb:12.3f} {t_np / t_nb:8.1f}")


if __name__ == "__main__":
    main()
