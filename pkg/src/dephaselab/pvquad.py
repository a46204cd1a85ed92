"""Principal-value integrals of ``(exp(i w a) - exp(i w b)) / w**2`` over the real line.

The analytic results are golden values for the spin-boson module; the
quadrature route confirms them numerically on a symmetric window ``[-R, R]``.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import AccuracyError, UnsupportedCase
from .quadrature import cos_tail_bound, integrate, oscillatory_breakpoints

_GRID_RTOL = 1e-12


@dataclass(frozen=True)
class PVResult:
    """Result of a principal-value integral.

    Attributes
    ----------
    value : float
    method : str
        ``"analytic"`` or ``"quadrature"``.
    error : float
        Estimated absolute error; zero for analytic results.
    """

    value: float
    method: str
    error: float = 0.0


def pv_exp_diff(a, b):
    """Analytic ``PV int (e^{i w a} - e^{i w b}) / w^2 dw`` for same-sign ``a, b``.

    Returns ``-pi (a - b)`` when both are nonnegative and ``pi (a - b)`` when
    both are nonpositive.

    Raises
    ------
    UnsupportedCase
        If ``a`` and ``b`` have strictly opposite signs.
    """
    a, b = float(a), float(b)
    if a >= 0 and b >= 0:
        return PVResult(-np.pi * (a - b), "analytic")
    if a <= 0 and b <= 0:
        return PVResult(np.pi * (a - b), "analytic")
    raise UnsupportedCase(f"pv_exp_diff needs a, b of the same sign, got a={a}, b={b}")


def pv_one_minus_exp(b):
    """Analytic ``PV int (1 - e^{i w b}) / w^2 dw = pi |b|``."""
    return PVResult(np.pi * abs(float(b)), "analytic")


def kernel_integral(t_k, t_km1, t_h, t_hm1):
    """Kernel built from two intervals ``[t_km1, t_k]`` and ``[t_hm1, t_h]`` of an ordered grid.

    Evaluates ``int (e^{i w t_k} - e^{i w t_km1})(e^{-i w t_h} - e^{-i w t_hm1}) / w^2 dw``
    through four :func:`pv_exp_diff` terms.  The result is ``2 pi (t_k - t_km1)``
    for coinciding intervals and ``0`` for non-overlapping ones.

    Raises
    ------
    UnsupportedCase
        If an interval is reversed or the two intervals overlap partially.
    """
    t_k, t_km1, t_h, t_hm1 = map(float, (t_k, t_km1, t_h, t_hm1))
    if t_k < t_km1 or t_h < t_hm1 or min(t_km1, t_hm1) < 0:
        raise UnsupportedCase("intervals must be ordered and nonnegative")
    same = abs(t_k - t_h) <= _GRID_RTOL * max(1.0, abs(t_k)) and abs(t_km1 - t_hm1) <= _GRID_RTOL * max(
        1.0, abs(t_km1)
    )
    disjoint = t_k <= t_hm1 or t_h <= t_km1
    if not (same or disjoint):
        raise UnsupportedCase("intervals are not consecutive-interval endpoints of a common grid")
    if same:
        t_h, t_hm1 = t_k, t_km1
    # product expands to e^{i w (t_k - t_h)} - e^{i w (t_k - t_hm1)} - e^{i w (t_km1 - t_h)} + e^{i w (t_km1 - t_hm1)}
    first = _pv_pair(t_k - t_h, t_k - t_hm1)
    second = _pv_pair(t_km1 - t_h, t_km1 - t_hm1)
    return first - second


def _pv_pair(a, b):
    if abs(a) < _GRID_RTOL * max(1.0, abs(b)):
        a = 0.0
    if abs(b) < _GRID_RTOL * max(1.0, abs(a)):
        b = 0.0
    return pv_exp_diff(a, b).value


def pv_quadrature(a, b, radius=None, tol=1e-8):
    """Numerical ``PV int (e^{i w a} - e^{i w b}) / w^2 dw`` on the window ``[-R, R]``.

    The imaginary integrand is odd and cancels exactly on a symmetric window,
    so only ``2 int_0^R (cos(a w) - cos(b w)) / w^2`` is computed, with the
    removable singularity at ``w = 0`` handled by series.  The non-oscillatory
    ``1/w^2`` parts beyond ``R`` are added exactly; the oscillatory parts are
    bounded and included in the reported error.

    Parameters
    ----------
    a, b : float
    radius : float, optional
        Window half-width ``R``.  Chosen from ``tol`` when omitted.
    tol : float
        Target absolute error.

    Raises
    ------
    AccuracyError
        When the tail bound at the given radius already exceeds ``tol`` or the
        panel budget runs out.
    """
    a, b = float(a), float(b)
    if a == b:
        return PVResult(0.0, "quadrature", 0.0)
    taus = [t for t in (a, b) if t != 0.0]
    if radius is None:
        radius = max(np.sqrt(8.0 * sum(1.0 / abs(t) for t in taus) / tol), 10.0 * np.pi / min(map(abs, taus)))
    radius = float(radius)
    if radius <= 0:
        raise ValueError("radius must be positive")
    tail = 2.0 * sum(cos_tail_bound(t, radius) for t in taus)
    if tail > tol:
        raise AccuracyError(f"tail bound {tail:.3g} at radius {radius:g} exceeds tol={tol:g}")

    fa = kernels.one_minus_cos_over_sq

    def integrand(x):
        return kernels.real_kernel(fa, x, b) - kernels.real_kernel(fa, x, a)

    omega_max = max(abs(a), abs(b))
    edges = oscillatory_breakpoints(0.0, radius, omega_max)
    res = integrate(integrand, edges, tol=0.5 * (tol - tail) / 2.0)
    # exact tails of the constant parts: int_R^inf 1/w^2 (each of 1-cos terms)
    const_tail = (1.0 if b != 0 else 0.0) - (1.0 if a != 0 else 0.0)
    value = 2.0 * (float(np.real(res.value)) + const_tail / radius)
    return PVResult(value, "quadrature", 2.0 * res.error + tail)
