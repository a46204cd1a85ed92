"""Finite-dimensional dephasing models.

A :class:`BlockModel` holds ``d`` Hermitian bath blocks ``H_0 ... H_{d-1}`` and a
bath state.  The system-bath Hamiltonian is block diagonal in the system basis,
so the reduced dynamics is the Hadamard channel ``rho -> Phi(t) * rho`` with

    phi_jl(t) = Tr[exp(-i t H_j) rho_B exp(i t H_l)].

Two storage modes are supported:

* dense: 2-D blocks of shape ``(n, n)`` and a 2-D bath density matrix;
* diagonal: 1-D blocks (the eigenvalues of mutually commuting blocks in a
  shared eigenbasis) and 1-D bath populations in that basis.  Coherences of the
  bath state never enter any trace in this case, so the representation is
  exact and scales to ~1e5 bath levels.
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ModelError

ATOL = 1e-12
UNITARITY_TOL = 1e-12
SOURCES = ("finite-model", "analytic", "spin-boson")


# ---------------------------------------------------------------------------
# validation helpers
# ---------------------------------------------------------------------------


def _as_square(a, name):
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ModelError(f"{name} must be a square matrix, got shape {a.shape}")
    return a


def check_hermitian(a, name="matrix", atol=ATOL):
    """Return ``a`` as a complex array after checking ``a = a^dagger`` entrywise."""
    a = _as_square(a, name)
    dev = np.abs(a - a.conj().T).max() if a.size else 0.0
    if dev > atol:
        raise ModelError(f"{name} is not Hermitian (max deviation {dev:.3g} > {atol:g})")
    return a


def check_density(a, name="density matrix", atol=ATOL):
    """Return ``a`` after checking Hermiticity, unit trace and positivity."""
    a = check_hermitian(a, name, atol)
    tr = np.trace(a).real
    if abs(tr - 1.0) > atol:
        raise ModelError(f"{name} trace is {tr!r}, expected 1 within {atol:g}")
    lam = np.linalg.eigvalsh(0.5 * (a + a.conj().T)).min()
    if lam < -atol:
        raise ModelError(f"{name} has negative eigenvalue {lam:.3g}")
    return a


def _check_populations(p, name="bath populations"):
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ModelError(f"{name} must be a nonempty 1-D array")
    if p.min() < -ATOL:
        raise ModelError(f"{name} has negative entry {p.min():.3g}")
    if abs(p.sum() - 1.0) > ATOL:
        raise ModelError(f"{name} sum to {p.sum()!r}, expected 1 within {ATOL:g}")
    return p


def _frozen(a):
    a = np.array(a)
    a.setflags(write=False)
    return a


def expm_hermitian(H, t):
    """``exp(-i t H)`` for Hermitian ``H`` via eigendecomposition.

    Raises
    ------
    ModelError
        If the result is not unitary to :data:`UNITARITY_TOL` in operator norm.
    """
    lam, V = np.linalg.eigh(check_hermitian(H, "H"))
    return _unitary_from_eig(lam, V, t)


def _unitary_from_eig(lam, V, t):
    U = (V * np.exp(-1j * t * lam)) @ V.conj().T
    dev = np.linalg.norm(U.conj().T @ U - np.eye(len(lam)), 2)
    if dev > UNITARITY_TOL:
        raise ModelError(f"matrix exponential not unitary: ||U^dag U - I|| = {dev:.3g}")
    return U


# ---------------------------------------------------------------------------
# core types
# ---------------------------------------------------------------------------


class QuditState:
    """Density matrix of the ``d``-level system.

    Parameters
    ----------
    entries : array_like, shape (d, d)
    validate : bool
        Check Hermiticity, trace and positivity to 1e-12.
    """

    __slots__ = ("entries",)

    def __init__(self, entries, validate=True):
        m = check_density(entries, "qudit state") if validate else np.asarray(entries, dtype=np.complex128)
        object.__setattr__(self, "entries", _frozen(m))

    def __setattr__(self, name, value):
        raise AttributeError("QuditState is immutable")

    @property
    def d(self):
        return self.entries.shape[0]

    @classmethod
    def pure(cls, psi):
        """State ``|psi><psi|`` from a (not necessarily normalised) vector."""
        psi = np.asarray(psi, dtype=np.complex128)
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()))

    def __repr__(self):
        return f"QuditState(d={self.d})"


class BlockModel:
    """Block-diagonal system-bath Hamiltonian plus bath state.

    Parameters
    ----------
    blocks : sequence of array_like
        ``d >= 2`` Hermitian ``(n, n)`` matrices, or ``d`` real 1-D arrays of
        eigenvalues for commuting blocks.
    bath_state : array_like
        ``(n, n)`` density matrix, or length-``n`` populations in the diagonal
        mode.
    """

    def __init__(self, blocks, bath_state):
        blocks = [np.asarray(b) for b in blocks]
        if len(blocks) < 2:
            raise ModelError(f"need at least 2 blocks, got {len(blocks)}")
        ndims = {b.ndim for b in blocks}
        if ndims == {1}:
            if not _same_len(blocks):
                raise ModelError("all diagonal blocks must have the same bath dimension")
            if any(np.iscomplexobj(b) and np.abs(np.imag(b)).max() > ATOL for b in blocks):
                raise ModelError("diagonal blocks must be real")
            h = np.stack([np.real(b).astype(float) for b in blocks])
            if not np.all(np.isfinite(h)):
                raise ModelError("diagonal blocks must be finite reals")
            p = np.asarray(bath_state)
            if p.ndim == 2:
                p = np.real(np.diag(check_density(p, "bath_state")))
            p = _check_populations(p)
            if p.shape[0] != h.shape[1]:
                raise ModelError(f"bath_state dimension {p.shape[0]} != block dimension {h.shape[1]}")
            self.diagonal = True
            self._h = _frozen(h)
            self._pops = _frozen(p)
            self._blocks = None
            self._rho = None
        elif ndims == {2}:
            mats = [check_hermitian(b, f"block {j}") for j, b in enumerate(blocks)]
            if len({m.shape for m in mats}) != 1:
                raise ModelError(f"blocks have different bath dimensions: {[m.shape for m in mats]}")
            rho = check_density(bath_state, "bath_state")
            if rho.shape != mats[0].shape:
                raise ModelError(f"bath_state shape {rho.shape} != block shape {mats[0].shape}")
            self.diagonal = False
            self._blocks = _frozen(np.stack(mats))
            self._rho = _frozen(rho)
            self._eig = [np.linalg.eigh(m) for m in mats]
            self._h = None
            self._pops = None
        else:
            raise ModelError("blocks must be all 2-D matrices or all 1-D eigenvalue arrays")

    # constructors -----------------------------------------------------------

    @classmethod
    def from_commuting(cls, eigenvalues, populations):
        """Diagonal model from a ``(d, n)`` eigenvalue table and bath populations."""
        return cls(list(np.asarray(eigenvalues, dtype=float)), populations)

    @classmethod
    def from_measure(cls, measure, h_funcs):
        """Diagonal model ``H_j = h_j(H)`` with the bath spectral measure of ``H``."""
        if len(measure.locations) == 0:
            raise ModelError("empty spectral measure")
        x = measure.locations
        return cls([np.asarray(make_h_func(h)(x), dtype=float) for h in h_funcs], measure.weights)

    # accessors --------------------------------------------------------------

    @property
    def d(self):
        return len(self._h) if self.diagonal else len(self._blocks)

    @property
    def bath_dim(self):
        return self._h.shape[1] if self.diagonal else self._blocks.shape[1]

    @property
    def blocks(self):
        """Dense ``(d, n, n)`` blocks (built on demand in the diagonal mode)."""
        if self.diagonal:
            return np.stack([np.diag(h).astype(np.complex128) for h in self._h])
        return self._blocks

    @property
    def bath_state(self):
        """Dense bath density matrix (diagonal mode: ``diag(populations)``)."""
        return np.diag(self._pops).astype(np.complex128) if self.diagonal else self._rho

    @property
    def eigenvalues(self):
        """``(d, n)`` eigenvalue table of a diagonal model."""
        if not self.diagonal:
            raise ModelError("eigenvalue table only exists for diagonal models")
        return self._h

    @property
    def populations(self):
        if not self.diagonal:
            raise ModelError("populations only exist for diagonal models")
        return self._pops

    def propagators(self, t):
        """``(d, n, n)`` array of ``exp(-i t H_j)`` (dense models)."""
        if self.diagonal:
            raise ModelError("dense propagators are not formed for diagonal models")
        return np.stack([_unitary_from_eig(lam, V, t) for lam, V in self._eig])

    def __repr__(self):
        mode = "diagonal" if self.diagonal else "dense"
        return f"BlockModel(d={self.d}, bath_dim={self.bath_dim}, {mode})"


def _same_len(arrs):
    return len({a.shape for a in arrs}) == 1


@dataclass(frozen=True)
class DephasingMatrix:
    """Matrix of dephasing functions ``phi_jl`` at time ``t``."""

    phi: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        phi = np.array(self.phi, dtype=np.complex128)
        if phi.ndim != 2 or phi.shape[0] != phi.shape[1]:
            raise ModelError(f"dephasing matrix must be square, got {phi.shape}")
        np.fill_diagonal(phi, 1.0)
        object.__setattr__(self, "phi", _frozen(phi))
        object.__setattr__(self, "t", float(self.t))

    @property
    def d(self):
        return self.phi.shape[0]

    @classmethod
    def ones(cls, d, t=0.0):
        return cls(np.ones((d, d)), t)


@dataclass(frozen=True)
class DephasingTrajectory:
    """Dephasing matrices on a strictly increasing time grid starting at 0.

    Attributes
    ----------
    times : ndarray, shape (T,)
    phis : ndarray, shape (T, d, d)
    source : str
        One of ``finite-model``, ``analytic``, ``spin-boson``.
    """

    times: np.ndarray
    phis: np.ndarray
    source: str = "analytic"

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        phis = np.array(self.phis, dtype=np.complex128)
        if times.ndim != 1 or len(times) == 0:
            raise ModelError("times must be a nonempty 1-D grid")
        if times[0] != 0.0:
            raise ModelError(f"time grid must start at 0, got {times[0]!r}")
        if np.any(np.diff(times) <= 0):
            raise ModelError("time grid must be strictly increasing")
        if phis.ndim != 3 or phis.shape[0] != len(times) or phis.shape[1] != phis.shape[2]:
            raise ModelError(f"phis must have shape (T, d, d), got {phis.shape}")
        if self.source not in SOURCES:
            raise ModelError(f"unknown source tag {self.source!r}")
        idx = np.arange(phis.shape[1])
        phis[:, idx, idx] = 1.0
        if np.abs(phis[0] - 1.0).max() > ATOL:
            raise ModelError("dephasing matrix at t=0 must be all ones")
        phis[0] = 1.0
        object.__setattr__(self, "times", _frozen(times))
        object.__setattr__(self, "phis", _frozen(phis))

    @property
    def d(self):
        return self.phis.shape[1]

    def __len__(self):
        return len(self.times)

    def __getitem__(self, i):
        return DephasingMatrix(self.phis[i], self.times[i])

    @property
    def matrices(self):
        return [self[i] for i in range(len(self))]

    def series(self, j, l):
        """``phi_jl`` along the grid."""
        return self.phis[:, j, l]

    @classmethod
    def from_function(cls, times, func, d=2, source="analytic"):
        """Trajectory from ``func(t)``.

        ``func`` returns either the scalar ``phi_01`` (``d = 2``) or a full
        ``(d, d)`` matrix.
        """
        times = np.asarray(times, dtype=float)
        phis = np.empty((len(times), d, d), dtype=np.complex128)
        for i, t in enumerate(times):
            v = np.asarray(func(t), dtype=np.complex128)
            if v.ndim == 0:
                if d != 2:
                    raise ModelError("scalar dephasing functions need d = 2")
                v = np.array([[1.0, v], [np.conj(v), 1.0]])
            phis[i] = v
        return cls(times, phis, source)


@dataclass(frozen=True)
class SpectralMeasure:
    """Atomic probability measure on the real line.

    Attributes
    ----------
    locations : ndarray
    weights : ndarray
        Nonnegative, summing to 1 within 1e-12.
    """

    locations: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.locations, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if x.shape != w.shape or x.ndim != 1:
            raise ModelError("locations and weights must be 1-D arrays of equal length")
        if x.size == 0:
            raise ModelError("empty spectral measure")
        _check_populations(w, "measure weights")
        object.__setattr__(self, "locations", _frozen(x))
        object.__setattr__(self, "weights", _frozen(w))

    def __len__(self):
        return len(self.locations)


def cauchy_measure(gamma, center=0.0, radius=None, n_atoms=100_000):
    """Discretised Cauchy (Lorentzian) measure of full width ``gamma``.

    Atoms sit at the midpoints of ``n_atoms`` equal cells of
    ``[center - radius, center + radius]`` with weights proportional to the
    density, renormalised to 1.  Its Fourier transform approximates
    ``exp(-i center t - gamma |t| / 2)``; the truncated tails carry mass about
    ``gamma / (pi radius)``.

    Parameters
    ----------
    gamma : float
        Full width at half maximum, > 0.
    center : float
    radius : float, optional
        Truncation half-width; default ``2000 * gamma``.
    n_atoms : int
    """
    if gamma <= 0:
        raise ModelError("gamma must be positive")
    radius = 2000.0 * gamma if radius is None else float(radius)
    if radius <= 0 or n_atoms < 1:
        raise ModelError("radius and n_atoms must be positive")
    edges = np.linspace(center - radius, center + radius, int(n_atoms) + 1)
    x = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * gamma
    w = half / np.pi / ((x - center) ** 2 + half**2)
    return SpectralMeasure(x, w / w.sum())


# ---------------------------------------------------------------------------
# h-functions
# ---------------------------------------------------------------------------


def make_h_func(spec):
    """Build a real function of the bath energy from a named description.

    Supported specs (dicts):

    * ``{"kind": "linear", "scale": a, "offset": b}``: ``a x + b``;
    * ``{"kind": "split-positive", "part": "positive" | "negative"}``:
      ``max(0, x)`` or ``-min(0, x)``;
    * ``{"kind": "tabulated", "x": [...], "y": [...]}``: linear interpolation,
      constant extrapolation.

    Callables are returned unchanged.
    """
    if callable(spec):
        return spec
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ModelError(f"h-function spec must be a dict with a 'kind', got {spec!r}")
    kind = spec["kind"]
    allowed = {"linear": {"scale", "offset"}, "split-positive": {"part"}, "tabulated": {"x", "y"}}
    if kind not in allowed:
        raise ModelError(f"unknown h-function kind {kind!r}; expected one of {sorted(allowed)}")
    extra = set(spec) - allowed[kind] - {"kind"}
    if extra:
        raise ModelError(f"unknown fields {sorted(extra)} in {kind} h-function")
    if kind == "linear":
        a, b = float(spec.get("scale", 1.0)), float(spec.get("offset", 0.0))
        return lambda x: a * np.asarray(x, dtype=float) + b
    if kind == "split-positive":
        part = spec.get("part", "positive")
        if part == "positive":
            return lambda x: np.maximum(0.0, np.asarray(x, dtype=float))
        if part == "negative":
            return lambda x: -np.minimum(0.0, np.asarray(x, dtype=float))
        raise ModelError(f"split-positive part must be 'positive' or 'negative', got {part!r}")
    xs = np.asarray(spec["x"], dtype=float)
    ys = np.asarray(spec["y"], dtype=float)
    if xs.ndim != 1 or xs.shape != ys.shape or len(xs) < 2 or np.any(np.diff(xs) <= 0):
        raise ModelError("tabulated h-function needs increasing x and matching y (length >= 2)")
    if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
        raise ModelError("tabulated h-function samples must be finite")
    return lambda x: np.interp(np.asarray(x, dtype=float), xs, ys)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def _check_time(t):
    t = float(t)
    if not t >= 0:
        raise ModelError(f"time must be nonnegative, got {t!r}")
    return t


def _diag_phi(h, w, times):
    """``phi_jl(t) = sum_a w_a exp(-i t (h_j - h_l)(a))`` for each time, chunked over atoms."""
    d, N = h.shape
    out = np.zeros((len(times), d, d), dtype=np.complex128)
    for j in range(d):
        for l in range(j + 1, d):
            diff = h[j] - h[l]
            for start in range(0, N, 20_000):
                sl = slice(start, start + 20_000)
                out[:, j, l] += np.exp(-1j * np.outer(times, diff[sl])) @ w[sl]
            out[:, l, j] = np.conj(out[:, j, l])
    idx = np.arange(d)
    out[:, idx, idx] = 1.0
    return out


def _dense_phi(model, t):
    U = model.propagators(t)
    A = U @ model.bath_state
    return np.einsum("jxy,lxy->jl", A, U.conj())


def dephasing_matrix(model: BlockModel, t) -> DephasingMatrix:
    """Dephasing matrix ``phi_jl(t) = Tr[e^{-itH_j} rho_B e^{itH_l}]``.

    The diagonal is set to exactly 1.
    """
    t = _check_time(t)
    if t == 0.0:
        return DephasingMatrix.ones(model.d)
    if model.diagonal:
        return DephasingMatrix(_diag_phi(model.eigenvalues, model.populations, np.array([t]))[0], t)
    return DephasingMatrix(_dense_phi(model, t), t)


def trajectory(model: BlockModel, times) -> DephasingTrajectory:
    """Dephasing trajectory of a finite model on a grid starting at 0."""
    times = np.asarray(times, dtype=float)
    if model.diagonal:
        phis = _diag_phi(model.eigenvalues, model.populations, times)
    else:
        phis = np.stack([_dense_phi(model, t) for t in times])
    return DephasingTrajectory(times, phis, "finite-model")


def _state_array(rho):
    return rho.entries if isinstance(rho, QuditState) else check_density(rho, "qudit state")


def apply_channel(phi: DephasingMatrix, rho) -> QuditState:
    """Hadamard channel ``Phi(t) * rho`` (entrywise product)."""
    r = _state_array(rho)
    p = phi.phi if isinstance(phi, DephasingMatrix) else np.asarray(phi)
    if p.shape != r.shape:
        raise ModelError(f"dimension mismatch: Phi is {p.shape}, rho is {r.shape}")
    out = p * r
    np.fill_diagonal(out, np.diag(r))
    return QuditState(out, validate=False)


def reduced_dynamics_oracle(model: BlockModel, rho, t) -> QuditState:
    """Reduced state ``Tr_B[U (rho x rho_B) U^dagger]`` with the full block-diagonal ``U``.

    Independent of the dephasing-matrix path: the full ``d n``-dimensional
    Hamiltonian is exponentiated directly.
    """
    t = _check_time(t)
    r = _state_array(rho)
    d, n = model.d, model.bath_dim
    if r.shape != (d, d):
        raise ModelError(f"state has shape {r.shape}, model has d={d}")
    H = np.zeros((d * n, d * n), dtype=np.complex128)
    blocks = model.blocks
    for j in range(d):
        H[j * n:(j + 1) * n, j * n:(j + 1) * n] = blocks[j]
    U = expm_hermitian(H, t)
    full = U @ np.kron(r, model.bath_state) @ U.conj().T
    red = np.einsum("ixjx->ij", full.reshape(d, n, d, n))
    return QuditState(red, validate=False)


def coherence(rho) -> float:
    """l1 coherence ``sum_{j != l} |rho_jl|``."""
    r = rho.entries if isinstance(rho, QuditState) else np.asarray(rho)
    return float(np.abs(r).sum() - np.abs(np.diag(r)).sum())


def commuting_dephasing(measure: SpectralMeasure, h_funcs: Sequence, t) -> DephasingMatrix:
    """Dephasing matrix of ``H_j = h_j(H)`` for a bath in a state with spectral measure ``measure``.

    ``phi_jl(t) = sum_a w_a exp(-i t (h_j(x_a) - h_l(x_a)))``.
    """
    if measure is None or len(measure.locations) == 0:
        raise ModelError("empty spectral measure")
    t = _check_time(t)
    x = measure.locations
    h = np.stack([np.asarray(make_h_func(f)(x), dtype=float) for f in h_funcs])
    return DephasingMatrix(_diag_phi(h, measure.weights, np.array([t]))[0], t)


# ---------------------------------------------------------------------------
# random instances
# ---------------------------------------------------------------------------


def random_hermitian(rng, n, scale=1.0):
    """Hermitian matrix with standard complex Gaussian entries."""
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * 0.5 * (a + a.conj().T)


def random_density(rng, n, rank=None):
    """Random density matrix of the given rank (full rank by default)."""
    k = n if rank is None else rank
    g = rng.normal(size=(n, k)) + 1j * rng.normal(size=(n, k))
    r = g @ g.conj().T
    return r / np.trace(r).real


def random_block_model(rng, d, bath_dim, scale=1.0):
    """Dense model with independent random blocks and a random bath state."""
    return BlockModel([random_hermitian(rng, bath_dim, scale) for _ in range(d)], random_density(rng, bath_dim))
