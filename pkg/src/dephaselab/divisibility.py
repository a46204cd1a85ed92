"""Divisibility, semigroup and monotonicity diagnostics for dephasing trajectories.

A dephasing channel ``Lambda_t(rho) = Phi(t) * rho`` is CP-divisible on a grid
when every propagator ``Phi(t) * Phi(s)^{*-1}`` (entrywise quotient) is
positive semidefinite.  For Hadamard channels positivity and complete
positivity of the propagator coincide, so both report flags come from the same
test.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import NotInvertible
from .model import DephasingMatrix, DephasingTrajectory, QuditState, coherence

INVERTIBLE_TOL = 1e-14
AMBIGUOUS_MODULUS = 1e-6


@dataclass(frozen=True)
class PropagatorMatrix:
    """Entrywise quotient ``phi_jl(t) / phi_jl(s)``."""

    entries: np.ndarray
    s: float
    t: float

    @property
    def d(self):
        return self.entries.shape[0]


@dataclass(frozen=True)
class SemigroupFit:
    """Exponential fit ``phi_jl(t) = exp(-(i Omega_jl + gamma_jl / 2) t)``.

    Attributes
    ----------
    omega, gamma : ndarray, shape (d, d)
    residual : float
        ``max |phi - fit|`` over the grid and all entries.
    semigroup : bool
        ``residual < tol``.
    ambiguous : bool
        Some ``|phi|`` fell below ``1e-6`` so the unwrapped phase is unreliable.
    """

    omega: np.ndarray
    gamma: np.ndarray
    residual: float
    semigroup: bool
    ambiguous: bool = False

    def rates_table(self):
        d = self.omega.shape[0]
        return [
            {"j": j, "l": l, "omega": float(self.omega[j, l]) + 0.0, "gamma": float(self.gamma[j, l]) + 0.0}
            for j in range(d)
            for l in range(j + 1, d)
        ]


@dataclass(frozen=True)
class Violation:
    s: float
    t: float
    min_eigenvalue: float


@dataclass
class DivisibilityReport:
    """Outcome of :func:`is_cp_divisible`.

    ``cp_divisible`` and ``p_divisible`` are produced by the same PSD test.
    ``semigroup`` is ``None`` unless a semigroup tolerance was requested; when
    set it implies ``cp_divisible``.
    """

    invertible: bool
    cp_divisible: bool
    p_divisible: bool
    semigroup: Optional[bool]
    first_violation: Optional[Violation]
    monotonicity_ok: np.ndarray
    pairs: list = field(default_factory=list)
    fit: Optional[SemigroupFit] = None

    @property
    def monotone(self):
        """All entries have non-increasing modulus on the grid."""
        return bool(np.all(self.monotonicity_ok))

    def to_dict(self):
        d = self.monotonicity_ok.shape[0]
        out = {
            "invertible": self.invertible,
            "cp_divisible": self.cp_divisible,
            "p_divisible": self.p_divisible,
            "semigroup": self.semigroup,
            "first_violation": None,
            "monotonicity": [
                {"j": j, "l": l, "ok": bool(self.monotonicity_ok[j, l])} for j in range(d) for l in range(j + 1, d)
            ],
            "violations": [
                {"s": s, "t": t, "min_eigenvalue": lam} for s, t, lam, ok in self.pairs if not ok
            ],
        }
        if self.first_violation is not None:
            v = self.first_violation
            out["first_violation"] = {"s": v.s, "t": v.t, "min_eigenvalue": v.min_eigenvalue}
        if self.fit is not None:
            out["rates"] = self.fit.rates_table()
            out["semigroup_residual"] = self.fit.residual
        return out


def _phi_array(x):
    return x.phi if isinstance(x, DephasingMatrix) else np.asarray(x, dtype=np.complex128)


def _check_invertible(phi, where):
    small = np.abs(phi) < INVERTIBLE_TOL
    if np.any(small):
        idx = tuple(int(i) for i in np.argwhere(small)[0])
        raise NotInvertible(f"|phi{idx[-2:]}| < {INVERTIBLE_TOL:g} {where}")


def hadamard_propagator(phi_t, phi_s) -> PropagatorMatrix:
    """Propagator ``Phi(t) * Phi(s)^{*-1}`` between two dephasing matrices.

    Raises
    ------
    NotInvertible
        If any ``|phi_jl(s)| < 1e-14``.
    ValueError
        If ``t < s``.
    """
    t = phi_t.t if isinstance(phi_t, DephasingMatrix) else 0.0
    s = phi_s.t if isinstance(phi_s, DephasingMatrix) else 0.0
    if t < s:
        raise ValueError(f"propagator needs t >= s, got s={s}, t={t}")
    a, b = _phi_array(phi_t), _phi_array(phi_s)
    _check_invertible(b, f"at s={s}")
    q = a / b
    np.fill_diagonal(q, 1.0)
    return PropagatorMatrix(q, s, t)


def psd_verdict(mats, tol=1e-10):
    """Relative PSD test on a stack of Hermitian matrices.

    Returns ``(ok, min_eigenvalues)`` with ``ok = lambda_min >= -tol * max |lambda|``.
    """
    mats = np.asarray(mats)
    herm = 0.5 * (mats + np.conj(np.swapaxes(mats, -1, -2)))
    lam = np.linalg.eigvalsh(herm)
    scale = np.abs(lam).max(axis=-1)
    lmin = lam[..., 0]
    return lmin >= -tol * scale, lmin


def is_cp_divisible(traj: DephasingTrajectory, tol=1e-10, all_pairs=False, semigroup_tol=None):
    """CP-divisibility of a trajectory on its grid.

    Parameters
    ----------
    traj : DephasingTrajectory
    tol : float
        Relative PSD threshold.
    all_pairs : bool
        Test every ``s < t`` pair instead of adjacent grid points.
    semigroup_tol : float, optional
        Also run :func:`is_semigroup` with this tolerance.

    Returns
    -------
    DivisibilityReport
    """
    phis = traj.phis
    for i, t in enumerate(traj.times):
        _check_invertible(phis[i], f"at t={t}")
    T = len(traj.times)
    if all_pairs:
        pi, pk = np.triu_indices(T, k=1)
    else:
        pi, pk = np.arange(T - 1), np.arange(1, T)
    quot = phis[pk] / phis[pi]
    ok, lmin = psd_verdict(quot, tol) if len(pi) else (np.zeros(0, bool), np.zeros(0))
    ratio = (1.0 + tol) / (1.0 - tol)
    mod = np.abs(phis)
    mono = np.all(mod[pk] <= mod[pi] * ratio, axis=0) if len(pi) else np.ones(phis.shape[1:], bool)
    pairs = [(float(traj.times[a]), float(traj.times[b]), float(l), bool(o)) for a, b, l, o in zip(pi, pk, lmin, ok)]
    pairs.sort(key=lambda p: (p[0], p[1]))
    first = next((Violation(s, t, lam) for s, t, lam, o in pairs if not o), None)
    cp = first is None
    fit = None
    semigroup = None
    if semigroup_tol is not None:
        fit = is_semigroup(traj, semigroup_tol)
        semigroup = bool(fit.semigroup and cp)
    return DivisibilityReport(True, cp, cp, semigroup, first, mono, pairs, fit)


def is_semigroup(traj: DephasingTrajectory, tol=1e-8) -> SemigroupFit:
    """Fit ``log phi_jl(t)`` by a line through the origin.

    The phase is unwrapped along the grid.  ``gamma_jl = -2 Re(slope)`` and
    ``Omega_jl = -Im(slope)``.

    Raises
    ------
    NotInvertible
        If any ``|phi_jl| < 1e-14`` on the grid.
    ValueError
        With fewer than 3 grid points.
    """
    times = traj.times
    if len(times) < 3:
        raise ValueError("semigroup fit needs at least 3 grid points")
    d = traj.d
    omega = np.zeros((d, d))
    gamma = np.zeros((d, d))
    residual = 0.0
    ambiguous = False
    tt = float(np.dot(times, times))
    for j in range(d):
        for l in range(j + 1, d):
            phi = traj.series(j, l)
            mod = np.abs(phi)
            if mod.min() < INVERTIBLE_TOL:
                raise NotInvertible(f"phi_{j}{l} vanishes on the grid")
            ambiguous |= bool(mod.min() < AMBIGUOUS_MODULUS)
            log = np.log(mod) + 1j * np.unwrap(np.angle(phi))
            slope = np.dot(times, log) / tt
            gamma[j, l] = gamma[l, j] = -2.0 * slope.real
            omega[j, l] = -slope.imag
            omega[l, j] = slope.imag
            residual = max(residual, float(np.abs(phi - np.exp(slope * times)).max()))
    return SemigroupFit(omega, gamma, residual, residual < tol, ambiguous)


def _trace_norm(h):
    return np.abs(np.linalg.eigvalsh(h)).sum(axis=-1)


@dataclass(frozen=True)
class MonotonicityResult:
    """Finite-difference monotonicity diagnostic.

    ``times`` and ``values`` are the sampled points; ``derivatives`` is filled
    by :func:`blp_check` only.
    """

    ok: bool
    times: np.ndarray
    values: np.ndarray
    derivatives: Optional[np.ndarray] = None
    tolerance: float = 0.0
    first_violation: Optional[tuple] = None


def blp_check(traj: DephasingTrajectory, rho1, rho2, tol=None) -> MonotonicityResult:
    """Central-difference derivative of the trace distance ``D(t) = ||Lambda_t(rho1 - rho2)||_1 / 2``.

    Parameters
    ----------
    tol : float, optional
        Largest tolerated positive derivative; default ``10 h**2`` with ``h``
        the largest grid step.

    Returns
    -------
    MonotonicityResult
        ``times``/``derivatives`` cover the interior grid points; ``values``
        holds ``D`` on the whole grid.
    """
    r1 = rho1.entries if isinstance(rho1, QuditState) else np.asarray(rho1)
    r2 = rho2.entries if isinstance(rho2, QuditState) else np.asarray(rho2)
    delta = r1 - r2
    evolved = traj.phis * delta[None]
    idx = np.arange(traj.d)
    evolved[:, idx, idx] = np.diag(delta)
    dist = 0.5 * _trace_norm(evolved)
    times = traj.times
    if len(times) < 3:
        raise ValueError("blp_check needs at least 3 grid points")
    h = float(np.diff(times).max())
    tol = 10.0 * h * h if tol is None else float(tol)
    deriv = np.gradient(dist, times)[1:-1]
    bad = np.flatnonzero(deriv > tol)
    first = (float(times[1 + bad[0]]), float(deriv[bad[0]])) if len(bad) else None
    return MonotonicityResult(len(bad) == 0, times[1:-1], dist, deriv, tol, first)


def coherence_monotonicity(traj: DephasingTrajectory, rho, tol=1e-12) -> MonotonicityResult:
    """Check that ``C(Lambda_t(rho))`` is non-increasing along the grid.

    A step ``t_i -> t_{i+1}`` violates when the coherence grows by more than
    ``tol * max(1, C(t_i))``; ``first_violation`` is ``(t_i, t_{i+1}, increase)``.
    """
    r = rho.entries if isinstance(rho, QuditState) else np.asarray(rho)
    vals = np.array([coherence(p * r) for p in traj.phis])
    inc = np.diff(vals)
    bad = np.flatnonzero(inc > tol * np.maximum(1.0, vals[:-1]))
    first = None
    if len(bad):
        i = bad[0]
        first = (float(traj.times[i]), float(traj.times[i + 1]), float(inc[i]))
    return MonotonicityResult(len(bad) == 0, traj.times, vals, None, tol, first)
