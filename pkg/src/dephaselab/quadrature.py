"""Adaptive Gauss-Legendre panel quadrature for smooth oscillatory integrands.

Each panel is integrated with an ``n``-point and a ``2n``-point rule; the
difference is the panel error estimate.  Panels whose estimate exceeds their
share of the tolerance (proportional to panel width) are bisected.  The
integrand must accept a 1-D float array and return a real or complex array of
the same length.
"""

from dataclasses import dataclass

import numpy as np

from .errors import AccuracyError

_ORDER = 16
_NODES_LO, _WEIGHTS_LO = np.polynomial.legendre.leggauss(_ORDER)
_NODES_HI, _WEIGHTS_HI = np.polynomial.legendre.leggauss(2 * _ORDER)


@dataclass(frozen=True)
class QuadResult:
    """Value and estimated absolute error of a quadrature."""

    value: complex
    error: float
    panels: int


def _panel_sums(func, lo, hi):
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    x_lo = (mid[:, None] + half[:, None] * _NODES_LO[None, :]).ravel()
    x_hi = (mid[:, None] + half[:, None] * _NODES_HI[None, :]).ravel()
    f_lo = np.asarray(func(x_lo)).reshape(len(lo), _ORDER)
    f_hi = np.asarray(func(x_hi)).reshape(len(lo), 2 * _ORDER)
    q_lo = half * (f_lo @ _WEIGHTS_LO)
    q_hi = half * (f_hi @ _WEIGHTS_HI)
    return q_hi, np.abs(q_hi - q_lo)


def integrate(func, breakpoints, tol=1e-10, max_panels=200_000):
    """Integrate ``func`` over ``[breakpoints[0], breakpoints[-1]]``.

    Parameters
    ----------
    func : callable
        Vectorised integrand.
    breakpoints : array_like
        Increasing initial panel edges.  Oscillatory integrands should start
        with panels no wider than about half a period.
    tol : float
        Target absolute error of the whole integral.
    max_panels : int
        Total panel budget; exceeding it raises :class:`AccuracyError`.

    Returns
    -------
    QuadResult
    """
    edges = np.asarray(breakpoints, dtype=float)
    if edges.ndim != 1 or len(edges) < 2 or np.any(np.diff(edges) <= 0):
        raise ValueError("breakpoints must be a strictly increasing sequence of length >= 2")
    span = edges[-1] - edges[0]
    lo, hi = edges[:-1], edges[1:]
    total = 0.0
    err_total = 0.0
    used = len(lo)
    while len(lo):
        q, e = _panel_sums(func, lo, hi)
        ok = e <= 0.5 * tol * (hi - lo) / span
        total = total + np.sum(q[ok])
        err_total += float(np.sum(e[ok]))
        lo, hi = lo[~ok], hi[~ok]
        if len(lo) == 0:
            break
        used += len(lo)
        if used > max_panels:
            raise AccuracyError(
                f"quadrature did not reach tol={tol:g} within {max_panels} panels "
                f"({len(lo)} panels unresolved)"
            )
        mid = 0.5 * (lo + hi)
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])
    return QuadResult(total, err_total, used)


def oscillatory_breakpoints(lo, hi, omega_scale, core=None, n_geometric=60):
    """Initial panel edges for an integrand oscillating at frequency ``omega_scale``.

    The ``core`` interval (default the whole range) is cut into half-period
    panels; outside it the edges grow geometrically, which suits integrands
    whose envelope decays like a power of ``omega``.
    """
    step = np.pi / max(float(omega_scale), 1e-12)
    c_lo, c_hi = (lo, hi) if core is None else (max(lo, core[0]), min(hi, core[1]))
    n = max(int(np.ceil((c_hi - c_lo) / step)), 1)
    pts = [np.linspace(c_lo, c_hi, n + 1)]
    if hi > c_hi:
        pts.append(_geometric(c_hi, hi, max(c_hi - c_lo, step), n_geometric))
    if lo < c_lo:
        pts.append(2 * c_lo - _geometric(c_lo, 2 * c_lo - lo, max(c_hi - c_lo, step), n_geometric))
    return np.unique(np.concatenate(pts))


def _geometric(start, stop, first, n):
    ratio = (stop - start) / first
    if ratio <= 1:
        return np.array([start, stop])
    return start + first * np.concatenate([[0.0], np.geomspace(1.0, ratio, n)])


def cos_tail_bound(tau, radius):
    """Bound on ``|int_R^inf cos(tau w) / w**2 dw|`` (same bound for sin)."""
    tau = abs(float(tau))
    if tau == 0:
        return 1.0 / radius
    return min(2.0 / (tau * radius**2), 1.0 / radius)
