"""Hot numeric kernels.

Every kernel exists twice: ``<name>_numba`` (compiled with :func:`numba.njit`)
and ``<name>_numpy`` (vectorised numpy).  The public name is bound to one of
them at import time according to :data:`dephaselab._accel.USE_NUMBA`.  Both
variants take and return plain ndarrays so that they can be benchmarked and
cross-checked against each other.

Tuple tensors use the flat index order ``(j_0, l_0, j_1, l_1, ...)`` with
``j_0`` most significant, i.e. ``itertools.product(range(d), repeat=2 * m)``.
"""

import itertools

import numpy as np

from ._accel import USE_NUMBA, njit

# |omega * t| below this switches (1 - cos)/omega^2 and (omega t - sin)/omega^2
# to their Taylor series
SERIES_THRESHOLD = 1e-4


# ---------------------------------------------------------------------------
# bath chains: Tr[U_{m-1,j} ... U_{0,j0} rho_B U_{0,l0}^+ ... U_{m-1,l}^+]
# ---------------------------------------------------------------------------


def bath_chain_numpy(U, Uh, rho_b):
    """All time-ordered bath traces for dense blocks.

    Parameters
    ----------
    U : ndarray, shape (m, d, n, n)
        ``U[k, j] = exp(-i dt_k H_j)``.
    Uh : ndarray, shape (m, d, n, n)
        Conjugate transposes of ``U``.
    rho_b : ndarray, shape (n, n)

    Returns
    -------
    ndarray, shape (d ** (2 m),)
    """
    m, d, n, _ = U.shape
    A = rho_b[None, :, :]
    for k in range(m):
        A = np.einsum("jxy,ayz,lzw->ajlxw", U[k], A, Uh[k], optimize=True)
        A = A.reshape(-1, n, n)
    return np.trace(A, axis1=1, axis2=2).copy()


@njit
def bath_chain_numba(U, Uh, rho_b):
    m, d, n, _ = U.shape
    total = d ** (2 * m)
    out = np.empty(total, dtype=np.complex128)
    stack = np.empty((m + 1, n, n), dtype=np.complex128)
    stack[0] = rho_b
    idx = np.zeros(2 * m, dtype=np.int64)
    first = 0
    for c in range(total):
        for k in range(first, m):
            stack[k + 1] = U[k, idx[2 * k]] @ stack[k] @ Uh[k, idx[2 * k + 1]]
        tr = 0j
        for x in range(n):
            tr += stack[m, x, x]
        out[c] = tr
        p = 2 * m - 1
        while p >= 0:
            idx[p] += 1
            if idx[p] < d:
                break
            idx[p] = 0
            p -= 1
        first = p // 2 if p >= 0 else 0
    return out


def diag_chain_numpy(h, w, dts):
    """All bath traces for commuting (diagonal) blocks.

    ``h[j, a]`` is the eigenvalue of block ``j`` on atom ``a``, ``w[a]`` the
    bath population and ``dts[k]`` the interval lengths.
    """
    d, N = h.shape
    m = len(dts)
    diff = dts[:, None, None, None] * (h[None, :, None, :] - h[None, None, :, :])
    out = np.empty(d ** (2 * m), dtype=np.complex128)
    for c, tup in enumerate(itertools.product(range(d), repeat=2 * m)):
        ph = np.zeros(N)
        for k in range(m):
            ph += diff[k, tup[2 * k], tup[2 * k + 1]]
        out[c] = np.dot(w, np.exp(-1j * ph))
    return out


@njit
def diag_chain_numba(h, w, dts):
    d, N = h.shape
    m = dts.shape[0]
    total = d ** (2 * m)
    out = np.empty(total, dtype=np.complex128)
    idx = np.zeros(2 * m, dtype=np.int64)
    for c in range(total):
        acc = 0j
        for a in range(N):
            ph = 0.0
            for k in range(m):
                ph += dts[k] * (h[idx[2 * k], a] - h[idx[2 * k + 1], a])
            acc += w[a] * np.exp(-1j * ph)
        out[c] = acc
        p = 2 * m - 1
        while p >= 0:
            idx[p] += 1
            if idx[p] < d:
                break
            idx[p] = 0
            p -= 1
    return out


# ---------------------------------------------------------------------------
# intervention expansion coefficients
# ---------------------------------------------------------------------------


def expansion_coefficients_numpy(rho, X, Y):
    """System-side coefficient of every tuple in the intervention expansion.

    ``c(j, l) = <l_n|Y_n X_n|j_n> prod_k <j_k|X_{k-1}|j_{k-1}> rho_{j0 l0}
    prod_k <l_{k-1}|Y_{k-1}|l_k>`` for interventions ``X[k], Y[k]``,
    ``k = 0..m-1``.
    """
    m = X.shape[0]
    C = np.array(rho, dtype=np.complex128)
    for k in range(1, m):
        C = np.einsum("...ab,ca,bd->...abcd", C, X[k - 1], Y[k - 1])
    C = C * (Y[m - 1] @ X[m - 1]).T
    return C.reshape(-1)


@njit
def expansion_coefficients_numba(rho, X, Y):
    m, d, _ = X.shape
    total = d ** (2 * m)
    out = np.empty(total, dtype=np.complex128)
    last = Y[m - 1] @ X[m - 1]
    idx = np.zeros(2 * m, dtype=np.int64)
    for c in range(total):
        v = rho[idx[0], idx[1]]
        for k in range(1, m):
            v *= X[k - 1, idx[2 * k], idx[2 * k - 2]] * Y[k - 1, idx[2 * k - 1], idx[2 * k + 1]]
        out[c] = v * last[idx[2 * m - 1], idx[2 * m - 2]]
        p = 2 * m - 1
        while p >= 0:
            idx[p] += 1
            if idx[p] < d:
                break
            idx[p] = 0
            p -= 1
    return out


# ---------------------------------------------------------------------------
# quadrature integrands
# ---------------------------------------------------------------------------


def one_minus_cos_over_sq_numpy(omega, t):
    """``(1 - cos(omega t)) / omega**2`` with the series below the threshold."""
    omega = np.asarray(omega, dtype=float)
    x = omega * t
    small = np.abs(x) < SERIES_THRESHOLD
    safe = np.where(small, 1.0, omega)
    direct = 2.0 * np.sin(0.5 * x) ** 2 / safe**2
    series = t * t * (0.5 - x * x / 24.0)
    return np.where(small, series, direct)


@njit
def one_minus_cos_over_sq_numba(omega, t):
    out = np.empty(omega.shape[0])
    for i in range(omega.shape[0]):
        x = omega[i] * t
        if abs(x) < SERIES_THRESHOLD:
            out[i] = t * t * (0.5 - x * x / 24.0)
        else:
            s = np.sin(0.5 * x)
            out[i] = 2.0 * s * s / (omega[i] * omega[i])
    return out


def t_minus_sin_over_sq_numpy(omega, t):
    """``t / omega - sin(omega t) / omega**2`` with the series near zero."""
    omega = np.asarray(omega, dtype=float)
    x = omega * t
    small = np.abs(x) < SERIES_THRESHOLD
    safe = np.where(small, 1.0, omega)
    direct = (x - np.sin(x)) / safe**2
    series = t * t * (x / 6.0 - x**3 / 120.0)
    return np.where(small, series, direct)


@njit
def t_minus_sin_over_sq_numba(omega, t):
    out = np.empty(omega.shape[0])
    for i in range(omega.shape[0]):
        x = omega[i] * t
        if abs(x) < SERIES_THRESHOLD:
            out[i] = t * t * (x / 6.0 - x * x * x / 120.0)
        else:
            out[i] = (x - np.sin(x)) / (omega[i] * omega[i])
    return out


def _increments_numpy(omega, tpts):
    # u_k = (e^{i w t_k} - e^{i w t_{k-1}}) / w, regular at w = 0
    lo = tpts[:-1, None]
    hi = tpts[1:, None]
    dt = hi - lo
    mid = 0.5 * (hi + lo)
    return 1j * dt * np.exp(1j * omega[None, :] * mid) * np.sinc(omega[None, :] * dt / (2 * np.pi))


def gsb_log_density_numpy(omega, fj, fl, tpts):
    """Log-amplitude density of a multi-time vacuum correlation.

    The correlation ``<vac| e^{i dt_0 H_l0} ... e^{-i dt_0 H_j0} |vac>`` of a
    dephasing-type GSB model equals the level phase times
    ``exp(integral of this density d omega)``.

    Parameters
    ----------
    omega : ndarray, shape (N,)
    fj, fl : ndarray, shape (m, N)
        Form factors ``f_{j_k}(omega)`` and ``f_{l_k}(omega)`` per interval.
    tpts : ndarray, shape (m + 1,)
        ``(0, t_0, t_1, ..., t_{m-1})``.
    """
    u = _increments_numpy(omega, tpts)
    dts = np.diff(tpts)
    A = np.sum((fj - fl) * u, axis=0)
    mod = -0.5 * np.abs(A) ** 2
    phase = np.zeros(omega.shape[0])
    for k in range(len(dts)):
        dk = np.abs(fj[k]) ** 2 - np.abs(fl[k]) ** 2
        if np.any(dk != 0):
            phase += dk * t_minus_sin_over_sq_numpy(omega, dts[k])
        for q in range(k):
            cross = u[k] * np.conj(u[q])
            phase += np.imag(cross * (fj[k] * np.conj(fj[q]) - fl[k] * np.conj(fl[q])))
    Aj = np.sum(fj * u, axis=0)
    Al = np.sum(fl * u, axis=0)
    phase += np.imag(np.conj(Al) * Aj)
    return mod + 1j * phase


@njit
def gsb_log_density_numba(omega, fj, fl, tpts):
    m = tpts.shape[0] - 1
    N = omega.shape[0]
    out = np.empty(N, dtype=np.complex128)
    u = np.empty(m, dtype=np.complex128)
    for i in range(N):
        w = omega[i]
        for k in range(m):
            dt = tpts[k + 1] - tpts[k]
            x = 0.5 * w * dt
            if abs(x) < SERIES_THRESHOLD:
                sinc = 1.0 - x * x / 6.0
            else:
                sinc = np.sin(x) / x
            u[k] = 1j * dt * np.exp(0.5j * w * (tpts[k + 1] + tpts[k])) * sinc
        A = 0j
        Aj = 0j
        Al = 0j
        phase = 0.0
        for k in range(m):
            A += (fj[k, i] - fl[k, i]) * u[k]
            Aj += fj[k, i] * u[k]
            Al += fl[k, i] * u[k]
            dk = abs(fj[k, i]) ** 2 - abs(fl[k, i]) ** 2
            if dk != 0.0:
                dt = tpts[k + 1] - tpts[k]
                x = w * dt
                if abs(x) < SERIES_THRESHOLD:
                    s = dt * dt * (x / 6.0 - x * x * x / 120.0)
                else:
                    s = (x - np.sin(x)) / (w * w)
                phase += dk * s
            for q in range(k):
                cross = u[k] * np.conj(u[q])
                phase += (cross * (fj[k, i] * np.conj(fj[q, i]) - fl[k, i] * np.conj(fl[q, i]))).imag
        phase += (np.conj(Al) * Aj).imag
        out[i] = -0.5 * abs(A) ** 2 + 1j * phase
    return out


if USE_NUMBA:
    bath_chain = bath_chain_numba
    diag_chain = diag_chain_numba
    expansion_coefficients = expansion_coefficients_numba
    one_minus_cos_over_sq = one_minus_cos_over_sq_numba
    t_minus_sin_over_sq = t_minus_sin_over_sq_numba
    gsb_log_density = gsb_log_density_numba
else:
    bath_chain = bath_chain_numpy
    diag_chain = diag_chain_numpy
    expansion_coefficients = expansion_coefficients_numpy
    one_minus_cos_over_sq = one_minus_cos_over_sq_numpy
    t_minus_sin_over_sq = t_minus_sin_over_sq_numpy
    gsb_log_density = gsb_log_density_numpy


def chain_tensor(U, rho_b):
    """Dispatching wrapper around :func:`bath_chain` that prepares ``Uh``."""
    U = np.ascontiguousarray(U, dtype=np.complex128)
    Uh = np.ascontiguousarray(np.conj(np.swapaxes(U, -1, -2)))
    return bath_chain(U, Uh, np.ascontiguousarray(rho_b, dtype=np.complex128))


def real_kernel(kernel, omega, t):
    """Call a scalar-``t`` integrand kernel on an arbitrary-shape ``omega``."""
    omega = np.asarray(omega, dtype=float)
    flat = np.ascontiguousarray(omega.reshape(-1))
    return kernel(flat, float(t)).reshape(omega.shape)
