"""Dephasing-type generalized spin-boson models with a vacuum bath.

Level ``j`` of the system couples to a boson field through the form factor
``f_j(omega)``::

    H_j = omega_j + int omega b_w^dag b_w dw + int (conj(f_j) b_w + f_j b_w^dag) dw.

All multi-time vacuum correlations

    C(t; j, l) = <vac| ... e^{i dt_0 H_{l_0}} ... e^{-i dt_0 H_{j_0}} ... |vac>

are Gaussian (Weyl-operator) integrals.  With ``u_k(w) = (e^{i w t_k} -
e^{i w t_{k-1}}) / w`` one has ``C = phase * exp(int L(w) dw)`` where ``L`` is
:func:`dephaselab.kernels.gsb_log_density`.  Flat (constant) couplings are
evaluated in closed form, other kinds by adaptive quadrature, and
:class:`ModeSet` provides a truncated-Fock brute force for validation.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import special

from . import kernels
from .errors import DivergentIntegral, KindError, LeakageError, ModelError, UnsupportedCase
from .grid import TimeGrid, as_grid, check_tuple
from .model import DephasingTrajectory
from .pvquad import kernel_integral
from .quadrature import integrate, oscillatory_breakpoints

FLAT_KINDS = ("flat-full-line", "flat-half-line", "flat-cutoff")
CONTINUOUS_KINDS = ("lorentzian", "gaussian", "tabulated")
KINDS = FLAT_KINDS + CONTINUOUS_KINDS + ("point-mass",)

LEAKAGE_TOL = 1e-10
_MODULUS_RTOL = 1e-12
# tails of continuous kinds are cut at center +- these multiples of width
_LORENTZ_SPAN = 1e4
_GAUSS_SPAN = 40.0


# ---------------------------------------------------------------------------
# form factors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FormFactor:
    """Coupling function ``f(omega)``.

    Use the constructors (:meth:`flat_full_line`, :meth:`lorentzian`, ...)
    rather than the raw fields.

    Attributes
    ----------
    kind : str
    value : complex
        Constant value (flat kinds), point-mass amplitude, or overall
        amplitude (lorentzian, gaussian).
    omega_cut : float
        Half-width of the flat-cutoff window.
    center, width : float
        Lorentzian (half width at half maximum) or Gaussian (standard
        deviation) shape parameters.
    omega_bar : float
        Location of a point mass.
    grid, samples : ndarray
        Tabulated abscissae and complex values.
    """

    kind: str
    value: complex = 0.0
    omega_cut: float = math.inf
    center: float = 0.0
    width: float = 1.0
    omega_bar: float = 0.0
    grid: Optional[np.ndarray] = field(default=None, compare=False)
    samples: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise KindError(f"unknown form-factor kind {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "value", complex(self.value))
        if not np.isfinite(self.value):
            raise ModelError("form-factor value must be finite")
        if self.kind in FLAT_KINDS[:2] or self.kind == "flat-cutoff":
            if self.kind == "flat-cutoff" and not (0 < self.omega_cut < math.inf):
                raise ModelError("flat-cutoff needs a finite positive omega_cut")
        if self.kind in ("lorentzian", "gaussian") and not self.width > 0:
            raise ModelError(f"{self.kind} width must be positive")
        if self.kind == "point-mass" and self.omega_bar == 0:
            raise ModelError("point-mass location omega_bar must be nonzero")
        if self.kind == "tabulated":
            g = np.asarray(self.grid, dtype=float)
            s = np.asarray(self.samples, dtype=np.complex128)
            if g.ndim != 1 or g.shape != s.shape or len(g) < 2 or np.any(np.diff(g) <= 0):
                raise ModelError("tabulated form factor needs increasing grid and matching samples")
            if not (np.all(np.isfinite(g)) and np.all(np.isfinite(s))):
                raise ModelError("tabulated samples must be finite")
            g.setflags(write=False)
            s.setflags(write=False)
            object.__setattr__(self, "grid", g)
            object.__setattr__(self, "samples", s)

    # constructors -----------------------------------------------------------

    @classmethod
    def flat_full_line(cls, value):
        return cls("flat-full-line", value)

    @classmethod
    def flat_half_line(cls, value):
        return cls("flat-half-line", value)

    @classmethod
    def flat_cutoff(cls, value, omega_cut, omega_lo=None):
        """Constant on ``[-omega_cut, omega_cut]``; only symmetric windows are accepted."""
        if omega_lo is not None and float(omega_lo) != -float(omega_cut):
            raise UnsupportedCase(
                f"asymmetric cutoff window [{omega_lo}, {omega_cut}] is not supported: "
                "the large-cutoff limit depends on the window shape"
            )
        return cls("flat-cutoff", value, omega_cut=float(omega_cut))

    @classmethod
    def lorentzian(cls, center, width, amplitude):
        """``|f|^2 = amplitude^2 * (width / pi) / ((w - center)^2 + width^2)``."""
        return cls("lorentzian", amplitude, center=float(center), width=float(width))

    @classmethod
    def gaussian(cls, center, width, amplitude):
        """``|f|^2 = amplitude^2 * normal_pdf(w; center, width)``."""
        return cls("gaussian", amplitude, center=float(center), width=float(width))

    @classmethod
    def tabulated(cls, grid, samples):
        """Linear interpolation of complex samples, zero outside the grid."""
        return cls("tabulated", 1.0, grid=np.asarray(grid, dtype=float), samples=np.asarray(samples))

    @classmethod
    def point_mass(cls, omega_bar, value):
        """Single mode at ``omega_bar`` with coupling ``value``."""
        return cls("point-mass", value, omega_bar=float(omega_bar))

    @classmethod
    def flat_for_rate(cls, gamma, kind="flat-full-line", omega_cut=None):
        """Flat coupling giving ``|phi(t)|^2 = exp(-gamma |t|)`` for the qubit ``f_1 = -f_0``.

        ``|f|^2 = gamma / 8 pi`` on the full line (and for a cutoff window),
        ``gamma / 4 pi`` on the half line.
        """
        if kind == "flat-half-line":
            return cls.flat_half_line(math.sqrt(gamma / (4 * math.pi)))
        f = math.sqrt(gamma / (8 * math.pi))
        if kind == "flat-cutoff":
            return cls.flat_cutoff(f, omega_cut)
        if kind != "flat-full-line":
            raise KindError(f"flat_for_rate needs a flat kind, got {kind!r}")
        return cls.flat_full_line(f)

    # behaviour ---------------------------------------------------------------

    @property
    def is_flat(self):
        return self.kind in FLAT_KINDS

    def scaled(self, s):
        """Form factor ``s * f``."""
        s = complex(s)
        if self.kind == "tabulated":
            return FormFactor.tabulated(self.grid, s * self.samples)
        return FormFactor(
            self.kind, s * self.value, self.omega_cut, self.center, self.width, self.omega_bar
        )

    def evaluate(self, omega):
        """Values ``f(omega)`` on an array (not defined for point masses)."""
        w = np.asarray(omega, dtype=float)
        if self.kind == "flat-full-line":
            return np.full(w.shape, self.value)
        if self.kind == "flat-half-line":
            return np.where(w >= 0, self.value, 0.0 + 0j)
        if self.kind == "flat-cutoff":
            return np.where(np.abs(w) <= self.omega_cut, self.value, 0.0 + 0j)
        if self.kind == "lorentzian":
            dens = (self.width / np.pi) / ((w - self.center) ** 2 + self.width**2)
            return self.value * np.sqrt(dens)
        if self.kind == "gaussian":
            z = (w - self.center) / self.width
            dens = np.exp(-0.5 * z * z) / (math.sqrt(2 * math.pi) * self.width)
            return self.value * np.sqrt(dens)
        if self.kind == "tabulated":
            re = np.interp(w, self.grid, self.samples.real, left=0.0, right=0.0)
            im = np.interp(w, self.grid, self.samples.imag, left=0.0, right=0.0)
            return re + 1j * im
        raise KindError("a point mass has no pointwise density; use its amplitude")

    def support(self):
        """``(lo, hi)`` outside of which ``f`` vanishes or is negligible."""
        if self.kind == "flat-full-line":
            return (-math.inf, math.inf)
        if self.kind == "flat-half-line":
            return (0.0, math.inf)
        if self.kind == "flat-cutoff":
            return (-self.omega_cut, self.omega_cut)
        if self.kind == "lorentzian":
            return (self.center - _LORENTZ_SPAN * self.width, self.center + _LORENTZ_SPAN * self.width)
        if self.kind == "gaussian":
            return (self.center - _GAUSS_SPAN * self.width, self.center + _GAUSS_SPAN * self.width)
        if self.kind == "tabulated":
            return (float(self.grid[0]), float(self.grid[-1]))
        return (self.omega_bar, self.omega_bar)

    def core(self):
        """Region where ``f`` has structure (used for initial panels)."""
        if self.kind in ("lorentzian", "gaussian"):
            span = 50.0 if self.kind == "lorentzian" else 12.0
            return (self.center - span * self.width, self.center + span * self.width)
        return self.support()


# ---------------------------------------------------------------------------
# level data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GSBLevelSpec:
    """Level energies ``omega_j`` and per-level form factors ``f_j``.

    All form factors must be of one family: the same flat kind (and cutoff),
    point masses at one common location, or continuous kinds
    (lorentzian/gaussian/tabulated, mixable).
    """

    energies: np.ndarray
    forms: tuple
    signs: Optional[tuple] = None

    def __post_init__(self):
        e = np.asarray(self.energies, dtype=float)
        forms = tuple(self.forms)
        if e.ndim != 1 or len(e) != len(forms) or len(e) < 2:
            raise ModelError("need d >= 2 level energies and one form factor per level")
        if not all(isinstance(f, FormFactor) for f in forms):
            raise ModelError("forms must be FormFactor instances")
        kinds = {f.kind for f in forms}
        if kinds & set(FLAT_KINDS) or "point-mass" in kinds:
            if len(kinds) != 1:
                raise KindError(f"cannot mix form-factor kinds {sorted(kinds)}")
            if len({f.omega_cut for f in forms}) != 1 or len({f.omega_bar for f in forms}) != 1:
                raise KindError("all levels must share the cutoff / point-mass location")
        e.setflags(write=False)
        object.__setattr__(self, "energies", e)
        object.__setattr__(self, "forms", forms)
        if self.signs is not None:
            object.__setattr__(self, "signs", tuple(int(s) for s in self.signs))

    @property
    def d(self):
        return len(self.forms)

    @property
    def kind(self):
        kinds = {f.kind for f in self.forms}
        return kinds.pop() if len(kinds) == 1 else "continuous"

    @property
    def constants(self):
        """Per-level constants of flat or point-mass specs."""
        if self.kind not in FLAT_KINDS + ("point-mass",):
            raise KindError(f"{self.kind} form factors are not constants")
        return np.array([f.value for f in self.forms])

    @classmethod
    def qubit(cls, form, omega0=0.0, omega1=0.0):
        """Qubit spin-boson special case ``f_1 = -f_0``."""
        return cls(np.array([omega0, omega1]), (form, form.scaled(-1)), (1, -1))

    @classmethod
    def with_signs(cls, form, signs, energies=None):
        """Shared form factor with level signs, ``f_j = s_j f``."""
        signs = tuple(int(s) for s in signs)
        if any(s not in (-1, 1) for s in signs):
            raise ModelError(f"signs must be +1 or -1, got {signs}")
        energies = np.zeros(len(signs)) if energies is None else energies
        return cls(np.asarray(energies, dtype=float), tuple(form.scaled(s) for s in signs), signs)


# ---------------------------------------------------------------------------
# multi-time correlations
# ---------------------------------------------------------------------------


def _level_phase(spec, grid, tup):
    e = spec.energies
    dts = grid.increments
    return np.exp(-1j * sum((e[tup[2 * k]] - e[tup[2 * k + 1]]) * dts[k] for k in range(grid.m)))


def _check_equal_moduli(c, tup):
    for k in range(len(tup) // 2):
        a, b = abs(c[tup[2 * k]]), abs(c[tup[2 * k + 1]])
        if abs(a - b) > _MODULUS_RTOL * max(1.0, a, b):
            raise DivergentIntegral(
                f"|f_{tup[2 * k]}|^2 - |f_{tup[2 * k + 1]}|^2 = {a * a - b * b:.3g} does not vanish at large "
                "|omega|; use a cutoff or continuous form factor"
            )


def _trivial(tup):
    return all(tup[2 * k] == tup[2 * k + 1] for k in range(len(tup) // 2))


def weyl_multitime_correlation(spec: GSBLevelSpec, grid, tup):
    """Multi-time vacuum correlation for flat full-line couplings.

    The log-amplitude reduces to double sums over intervals of the kernel
    ``K_kh = int u_k conj(u_h) dw`` from :func:`dephaselab.pvquad.kernel_integral`.
    Couplings may be complex but must share their modulus on every interval
    pair.

    Raises
    ------
    KindError
        If ``spec`` is not of the flat full-line kind.
    DivergentIntegral
        If ``|f_{j_k}| != |f_{l_k}|`` for some interval.
    """
    if spec.kind != "flat-full-line":
        raise KindError(f"Weyl closed form needs flat-full-line couplings, got {spec.kind}")
    grid = as_grid(grid)
    tup = check_tuple(tup, grid.m, spec.d)
    if _trivial(tup):
        return 1.0 + 0.0j
    c = spec.constants
    _check_equal_moduli(c, tup)
    m = grid.m
    edges = grid.edges
    fj = np.array([c[tup[2 * k]] for k in range(m)])
    fl = np.array([c[tup[2 * k + 1]] for k in range(m)])
    dd = fj - fl
    K = np.array([[kernel_integral(edges[k + 1], edges[k], edges[h + 1], edges[h]) for h in range(m)] for k in range(m)])
    modulus = -0.5 * np.real(np.einsum("k,h,kh->", dd, dd.conj(), K))
    phase = 0.0
    for p in range(m):
        for q in range(p):
            phase += np.imag(K[p, q] * (fj[p] * np.conj(fj[q]) - fl[p] * np.conj(fl[q])))
    phase += np.imag(np.einsum("p,q,qp->", fl.conj(), fj, K))
    return complex(_level_phase(spec, grid, tup) * np.exp(modulus + 1j * phase))


def _xlogx(x):
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    return np.where(ax > 0, x * np.log(np.where(ax > 0, ax, 1.0)), 0.0)


def _halfline_im_kernel(edges, a, b):
    """``int_0^inf Im(conj(u_a) u_b) dw`` in closed form."""
    ta, tam, tb, tbm = edges[a + 1], edges[a], edges[b + 1], edges[b]
    return -float(_xlogx(tb - ta) - _xlogx(tbm - ta) - _xlogx(tb - tam) + _xlogx(tbm - tam))


def _real_gauge(c):
    ref = c[np.argmax(np.abs(c))]
    if ref == 0:
        return np.zeros(len(c))
    r = c * np.conj(ref) / abs(ref)
    if np.abs(r.imag).max() > _MODULUS_RTOL * abs(ref):
        raise KindError("half-line correlations need couplings sharing one complex phase")
    return r.real


def _halfline_log(spec, grid, tup):
    c = spec.constants
    _check_equal_moduli(c, tup)
    r = _real_gauge(c)
    m = grid.m
    edges = grid.edges
    dts = grid.increments
    fj = np.array([r[tup[2 * k]] for k in range(m)])
    fl = np.array([r[tup[2 * k + 1]] for k in range(m)])
    modulus = -0.5 * np.pi * np.sum((fj - fl) ** 2 * dts)
    J = np.array([[_halfline_im_kernel(edges, a, b) for b in range(m)] for a in range(m)])
    phase = 0.0
    for p in range(m):
        for q in range(p):
            phase += J[q, p] * (fj[p] * fj[q] - fl[p] * fl[q])
    phase += float(np.einsum("p,q,pq->", fl, fj, J))
    return modulus + 1j * phase


def _coupling_arrays(spec, tup, omega):
    m = len(tup) // 2
    vals = [f.evaluate(omega) for f in spec.forms]
    fj = np.stack([vals[tup[2 * k]] for k in range(m)])
    fl = np.stack([vals[tup[2 * k + 1]] for k in range(m)])
    return np.ascontiguousarray(fj, dtype=np.complex128), np.ascontiguousarray(fl, dtype=np.complex128)


def _quadrature_log(spec, grid, tup, tol):
    edges = np.ascontiguousarray(grid.edges)
    used = sorted({tup[i] for i in range(len(tup))})
    supports = [spec.forms[j].support() for j in used]
    cores = [spec.forms[j].core() for j in used]
    lo, hi = min(s[0] for s in supports), max(s[1] for s in supports)
    core = (min(c[0] for c in cores), max(c[1] for c in cores))
    t_max = max(float(edges[-1]), 1e-12)

    def integrand(w):
        fj, fl = _coupling_arrays(spec, tup, w)
        return kernels.gsb_log_density(np.ascontiguousarray(w), fj, fl, edges)

    bps = oscillatory_breakpoints(lo, hi, t_max, core=core)
    for f in spec.forms:
        if f.kind == "tabulated":
            bps = np.union1d(bps, f.grid)
    bps = bps[(bps >= lo) & (bps <= hi)]
    return complex(integrate(integrand, bps, tol=tol).value)


def _log_amplitude(spec, grid, tup, tol):
    kind = spec.kind
    if kind == "flat-full-line":
        raise AssertionError("handled by weyl_multitime_correlation")
    if kind == "flat-half-line":
        return _halfline_log(spec, grid, tup)
    if kind == "point-mass":
        w = np.array([spec.forms[0].omega_bar])
        c = spec.constants
        m = grid.m
        fj = np.array([[c[tup[2 * k]]] for k in range(m)], dtype=np.complex128)
        fl = np.array([[c[tup[2 * k + 1]]] for k in range(m)], dtype=np.complex128)
        return complex(kernels.gsb_log_density(w, fj, fl, np.ascontiguousarray(grid.edges))[0])
    return _quadrature_log(spec, grid, tup, tol)


def gsb_multitime_correlation(spec: GSBLevelSpec, grid, tup, tol=1e-10):
    """Multi-time vacuum correlation for any supported form-factor family.

    Parameters
    ----------
    spec : GSBLevelSpec
    grid : TimeGrid or sequence of times
    tup : sequence of int
        ``(j_0, l_0, ..., j_{m-1}, l_{m-1})``.
    tol : float
        Absolute tolerance on the log-amplitude for quadrature kinds.
    """
    grid = as_grid(grid)
    tup = check_tuple(tup, grid.m, spec.d)
    if _trivial(tup):
        return 1.0 + 0.0j
    if spec.kind == "flat-full-line":
        return weyl_multitime_correlation(spec, grid, tup)
    return complex(_level_phase(spec, grid, tup) * np.exp(_log_amplitude(spec, grid, tup, tol)))


# ---------------------------------------------------------------------------
# single-interval dephasing functions
# ---------------------------------------------------------------------------


def window_integral(omega_cut, t):
    """``int_{-W}^{W} (1 - cos(w t)) / w^2 dw = 2 t [Si(W t) - (1 - cos(W t)) / (W t)]``."""
    t = abs(float(t))
    if t == 0:
        return 0.0
    if math.isinf(omega_cut):
        return math.pi * t
    x = omega_cut * t
    si, _ = special.sici(x)
    return 2.0 * t * (si - (1.0 - math.cos(x)) / x)


def cutoff_limit_dephasing(constants, omega_cut, j, l, t, energies=None):
    """Dephasing function for real constant couplings on ``[-omega_cut, omega_cut]``.

    ``omega_cut = inf`` returns the limit
    ``exp(-i (omega_j - omega_l) t) exp(-pi (f_j - f_l)^2 |t|)``.
    """
    c = np.asarray(constants)
    if np.iscomplexobj(c) and np.abs(np.imag(c)).max() > 0:
        raise ModelError("cutoff_limit_dephasing takes real constant couplings")
    c = np.real(c).astype(float)
    e = np.zeros(len(c)) if energies is None else np.asarray(energies, dtype=float)
    if not omega_cut > 0:
        raise ModelError("omega_cut must be positive")
    if j == l:
        return 1.0 + 0.0j
    df = c[j] - c[l]
    return complex(np.exp(-1j * (e[j] - e[l]) * t) * math.exp(-df * df * window_integral(omega_cut, t)))


def dephasing_gsb(spec: GSBLevelSpec, j, l, t, tol=1e-10):
    """Single-interval dephasing function ``phi_jl(t)`` of a GSB model.

    Flat kinds use closed forms (``pi |t|`` on the full line, ``pi |t| / 2``
    on the half line, the sine-integral window value for a cutoff); other
    kinds integrate the modulus and phase densities numerically.

    Raises
    ------
    DivergentIntegral
        For flat full/half-line couplings with ``|f_j| != |f_l|``.
    """
    t = float(t)
    if t < 0:
        raise ModelError("time must be nonnegative")
    if j == l:
        return 1.0 + 0.0j
    if j > l:
        return complex(np.conj(dephasing_gsb(spec, l, j, t, tol)))
    if spec.kind == "flat-cutoff":
        c = spec.constants
        K = window_integral(spec.forms[0].omega_cut, t)
        log = -abs(c[j] - c[l]) ** 2 * K + 2j * np.imag(np.conj(c[l]) * c[j]) * K
        return complex(np.exp(-1j * (spec.energies[j] - spec.energies[l]) * t) * np.exp(log))
    return gsb_multitime_correlation(spec, TimeGrid([t]), (j, l), tol)


def dephasing_qubit_sb(form: FormFactor, omega0, omega1, t, tol=1e-10):
    """Qubit spin-boson dephasing ``e^{-i(w0 - w1)t} exp(-4 int |f|^2 (1 - cos wt) / w^2)``."""
    return dephasing_gsb(GSBLevelSpec.qubit(form, omega0, omega1), 0, 1, t, tol)


def trajectory_gsb(spec: GSBLevelSpec, times, tol=1e-10) -> DephasingTrajectory:
    """Dephasing trajectory of a GSB model, source ``spin-boson``."""
    times = np.asarray(times, dtype=float)
    d = spec.d
    phis = np.ones((len(times), d, d), dtype=np.complex128)
    for i, t in enumerate(times):
        for j in range(d):
            for l in range(j + 1, d):
                v = dephasing_gsb(spec, j, l, t, tol)
                phis[i, j, l] = v
                phis[i, l, j] = np.conj(v)
    return DephasingTrajectory(times, phis, "spin-boson")


def halfline_phase_defect(spec: GSBLevelSpec, t0, t1, j=0, l=1, tol=1e-10):
    """Phase by which the three-time condition ``(j, j, j, l)`` fails for half-line couplings.

    Returns ``|f_j - f_l|^2 * I`` with
    ``I = int_0^inf [sin(w t0) - sin(w t1) + sin(w (t1 - t0))] / w^2 dw``,
    computed by adaptive quadrature on ``[0, R]`` plus the exact sine-integral
    tail beyond ``R``.  This is ``arg(lhs / rhs)`` of that condition.
    """
    if spec.kind != "flat-half-line":
        raise KindError(f"halfline_phase_defect needs flat-half-line couplings, got {spec.kind}")
    t0, t1 = float(t0), float(t1)
    if not t1 >= t0 >= 0:
        raise ModelError("need t1 >= t0 >= 0")
    c = spec.constants
    _check_equal_moduli(c, (j, l))
    pref = abs(c[j] - c[l]) ** 2
    coeffs = [(1.0, t0), (-1.0, t1), (1.0, t1 - t0)]
    coeffs = [(a, p) for a, p in coeffs if p > 0]
    if t0 == 0 or t1 == t0 or pref == 0:
        return 0.0
    radius = 200.0 / min(p for _, p in coeffs)

    def integrand(w):
        # sum c sin(p w) / w^2 = -sum c S(w, p) because sum c p = 0
        w = np.ascontiguousarray(w)
        return -sum(a * kernels.t_minus_sin_over_sq(w, p) for a, p in coeffs)

    res = integrate(integrand, oscillatory_breakpoints(0.0, radius, t1), tol=tol)
    tail = 0.0
    for a, p in coeffs:
        # int_R^inf sin(p w) / w^2 dw = sin(p R) / R - p Ci(p R)
        _, ci = special.sici(p * radius)
        tail += a * (math.sin(p * radius) / radius - p * ci)
    return float(pref * (float(np.real(res.value)) + tail))


# ---------------------------------------------------------------------------
# truncated Fock oracle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModeSet:
    """Finite set of bosonic modes with per-level couplings.

    Attributes
    ----------
    frequencies : ndarray, shape (K,)
        Nonzero mode frequencies.
    couplings : ndarray, shape (d, K)
        Amplitude ``g_{j,k}`` of level ``j`` on mode ``k``.
    truncation : ndarray of int, shape (K,)
        Fock-space dimension ``M >= 2`` per mode.
    """

    frequencies: np.ndarray
    couplings: np.ndarray
    truncation: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.frequencies, dtype=float)
        g = np.atleast_2d(np.asarray(self.couplings, dtype=np.complex128))
        M = np.broadcast_to(np.asarray(self.truncation, dtype=int), w.shape).copy()
        if w.ndim != 1 or g.shape[1] != len(w):
            raise ModelError("couplings must have shape (d, n_modes)")
        if np.any(w == 0):
            raise ModelError("mode frequencies must be nonzero")
        if np.any(M < 2):
            raise ModelError("truncation must be at least 2")
        for a in (w, g, M):
            a.setflags(write=False)
        object.__setattr__(self, "frequencies", w)
        object.__setattr__(self, "couplings", g)
        object.__setattr__(self, "truncation", M)

    @property
    def d(self):
        return self.couplings.shape[0]

    def __len__(self):
        return len(self.frequencies)

    @classmethod
    def single(cls, omega_bar, amplitudes, truncation=40):
        return cls(np.array([omega_bar]), np.asarray(amplitudes).reshape(-1, 1), truncation)

    @classmethod
    def from_flat_window(cls, constants, omega_cut, n_modes, truncation=40):
        """Riemann discretisation of constant couplings on ``[-omega_cut, omega_cut]``.

        Modes sit at cell midpoints (``n_modes`` must be even so none is at 0)
        with amplitudes ``f_j sqrt(d omega)``.
        """
        if n_modes % 2:
            raise ModelError("n_modes must be even so that no mode sits at omega = 0")
        edges = np.linspace(-omega_cut, omega_cut, n_modes + 1)
        w = 0.5 * (edges[1:] + edges[:-1])
        dw = edges[1] - edges[0]
        c = np.asarray(constants, dtype=np.complex128)
        return cls(w, np.outer(c, np.full(n_modes, math.sqrt(dw))), truncation)

    def union(self, other):
        """Disjoint union of two mode sets over the same levels."""
        if other.d != self.d:
            raise ModelError("mode sets couple different numbers of levels")
        return ModeSet(
            np.concatenate([self.frequencies, other.frequencies]),
            np.concatenate([self.couplings, other.couplings], axis=1),
            np.concatenate([self.truncation, other.truncation]),
        )


def _ladder(M):
    return np.diag(np.sqrt(np.arange(1, M)), 1).astype(np.complex128)


def fock_multitime(modes: ModeSet, energies, grid, tup):
    """Multi-time vacuum correlation by brute force in truncated Fock space.

    Each mode evolves independently under ``H_j = w n + conj(g_j) b + g_j b^dag``.

    Raises
    ------
    LeakageError
        If an evolved state puts more than 1e-10 population in the top two
        Fock levels of any mode.
    """
    grid = as_grid(grid)
    tup = check_tuple(tup, grid.m, modes.d)
    e = np.asarray(energies, dtype=float)
    if len(e) != modes.d:
        raise ModelError("need one level energy per coupled level")
    dts = grid.increments
    m = grid.m
    total = np.exp(-1j * sum((e[tup[2 * k]] - e[tup[2 * k + 1]]) * dts[k] for k in range(m)))
    cache = {}
    for k_mode, (w, M) in enumerate(zip(modes.frequencies, modes.truncation)):
        if M not in cache:
            b = _ladder(M)
            cache[M] = (b, np.diag(np.arange(M)).astype(np.complex128))
        b, n = cache[M]
        eig = []
        for j in range(modes.d):
            g = modes.couplings[j, k_mode]
            eig.append(np.linalg.eigh(w * n + np.conj(g) * b + g * b.conj().T))
        left = np.zeros(M, dtype=np.complex128)
        left[0] = 1.0
        right = left.copy()
        for k in range(m):
            for side, lev in ((0, tup[2 * k]), (1, tup[2 * k + 1])):
                lam, V = eig[lev]
                vec = left if side == 0 else right
                vec = V @ (np.exp(-1j * dts[k] * lam) * (V.conj().T @ vec))
                if np.sum(np.abs(vec[-2:]) ** 2) > LEAKAGE_TOL:
                    raise LeakageError(
                        f"mode {k_mode} (omega={w:g}, M={M}) leaks {np.sum(np.abs(vec[-2:]) ** 2):.3g} "
                        "population into its top two levels"
                    )
                if side == 0:
                    left = vec
                else:
                    right = vec
        total = total * np.vdot(right, left)
    return complex(total)


def truncated_fock_oracle(modes: ModeSet, energies, j, l, t):
    """``<0| e^{i t H_l} e^{-i t H_j} |0>`` over all modes, times the level phase."""
    return fock_multitime(modes, energies, TimeGrid([t]), (j, l))
