import itertools
import os
import subprocess
import sys

import numpy as np
import pytest

from dephaselab import _accel, kernels
from dephaselab.model import expm_hermitian, random_density, random_hermitian


def _chain_inputs(rng, m, d, n):
    U = np.stack([[expm_hermitian(random_hermitian(rng, n), -rng.uniform(0.1, 1)) for _ in range(d)] for _ in range(m)])
    Uh = np.ascontiguousarray(np.conj(np.swapaxes(U, -1, -2)))
    return np.ascontiguousarray(U), Uh, random_density(rng, n).astype(complex)


def test_bath_chain_variants_agree(rng):
    U, Uh, rho = _chain_inputs(rng, 3, 2, 3)
    a = kernels.bath_chain_numpy(U, Uh, rho)
    b = kernels.bath_chain_numba(U, Uh, rho)
    assert np.abs(a - b).max() < 1e-13


def test_bath_chain_against_explicit_products(rng):
    m, d, n = 2, 2, 3
    U, Uh, rho = _chain_inputs(rng, m, d, n)
    vals = kernels.bath_chain_numpy(U, Uh, rho)
    for c, tup in enumerate(itertools.product(range(d), repeat=2 * m)):
        A = rho
        for k in range(m):
            A = U[k, tup[2 * k]] @ A @ Uh[k, tup[2 * k + 1]]
        assert abs(np.trace(A) - vals[c]) < 1e-13


def test_diag_chain_variants_agree(rng):
    h = rng.normal(size=(3, 500))
    w = rng.uniform(size=500)
    w /= w.sum()
    dts = np.array([0.3, 0.9])
    assert np.abs(kernels.diag_chain_numpy(h, w, dts) - kernels.diag_chain_numba(h, w, dts)).max() < 1e-13


def test_expansion_coefficients_variants_agree(rng):
    X = rng.normal(size=(3, 2, 2)) + 1j * rng.normal(size=(3, 2, 2))
    Y = rng.normal(size=(3, 2, 2)) + 1j * rng.normal(size=(3, 2, 2))
    rho = random_density(rng, 2).astype(complex)
    a = kernels.expansion_coefficients_numpy(rho, X, Y)
    b = kernels.expansion_coefficients_numba(rho, X, Y)
    assert np.abs(a - b).max() < 1e-13


@pytest.mark.parametrize("name", ["one_minus_cos_over_sq", "t_minus_sin_over_sq"])
def test_integrand_variants_agree(name):
    omega = np.concatenate([np.linspace(-50, 50, 1001), [0.0, 1e-9, -3e-6]])
    a = getattr(kernels, f"{name}_numpy")(omega, 1.7)
    b = getattr(kernels, f"{name}_numba")(omega, 1.7)
    assert np.abs(a - b).max() < 1e-14


@pytest.mark.parametrize("t", [0.1, 1.0, 10.0])
def test_removable_singularity_series(t):
    # just below and just above the series switch
    for x in (0.0, 1e-7, 0.99e-4, 1.01e-4):
        w = np.array([x / t])
        v = kernels.one_minus_cos_over_sq_numpy(w, t)[0]
        assert abs(v - t * t * (0.5 - x * x / 24)) <= 1e-12 * t * t
        s = kernels.t_minus_sin_over_sq_numpy(w, t)[0]
        assert abs(s - t * t * (x / 6 - x**3 / 120)) <= 1e-12 * t * t
    assert np.isfinite(kernels.one_minus_cos_over_sq_numba(np.array([0.0]), t)).all()


def test_gsb_density_variants_agree(rng):
    omega = np.linspace(-30, 30, 777)
    fj = rng.normal(size=(3, 777)) + 1j * rng.normal(size=(3, 777))
    fl = rng.normal(size=(3, 777)) + 1j * rng.normal(size=(3, 777))
    tpts = np.array([0.0, 0.4, 1.1, 2.0])
    a = kernels.gsb_log_density_numpy(omega, fj, fl, tpts)
    b = kernels.gsb_log_density_numba(omega, fj, fl, tpts)
    assert np.abs(a - b).max() < 1e-11


def test_env_flag_selects_numpy_path():
    code = (
        "from dephaselab import _accel, kernels;"
        "assert not _accel.USE_NUMBA;"
        "assert kernels.bath_chain is kernels.bath_chain_numpy;"
        "print('ok')"
    )
    env = dict(os.environ, DEPHASELAB_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    assert out.stdout.strip() == "ok"


def test_default_binding_matches_flag():
    expected = kernels.bath_chain_numba if _accel.USE_NUMBA else kernels.bath_chain_numpy
    assert kernels.bath_chain is expected
