"""Quantum-regression hierarchy for dephasing models.

The ``m``-interval condition for an index tuple ``(j_0, l_0, ..., j_{m-1}, l_{m-1})``
compares the time-ordered bath trace

    Tr[e^{-i dt_{m-1} H_{j_{m-1}}} ... e^{-i dt_0 H_{j_0}} rho_B e^{i dt_0 H_{l_0}} ... e^{i dt_{m-1} H_{l_{m-1}}}]

with the product ``prod_k phi_{j_k l_k}(dt_k)`` (``dt_0 = t_0``).  All
conditions hold iff every intervention-dressed correlation computed with the
full dynamics equals the one computed from the reduced Hadamard channels.
"""

import itertools
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from . import kernels
from .errors import BudgetError, ModelError
from .grid import TimeGrid, as_grid, check_tuple
from .model import BlockModel, DephasingMatrix, QuditState, dephasing_matrix
from .pvquad import kernel_integral
from .spinboson import (
    GSBLevelSpec,
    _check_equal_moduli,
    _halfline_im_kernel,
    _real_gauge,
    dephasing_gsb,
    gsb_multitime_correlation,
)

__all__ = [
    "TimeGrid",
    "Intervention",
    "RegressionRow",
    "RegressionReport",
    "regression_lhs",
    "regression_rhs",
    "check_hierarchy",
    "n2_named_conditions",
    "intervention_lhs",
    "intervention_rhs",
    "expansion_reconstruction",
    "random_grids",
    "enumerate_tuples",
    "pauli_interventions",
]

DEFAULT_BUDGET = 10**6
PAULI = {
    "I": np.eye(2, dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}

Model = Union[BlockModel, GSBLevelSpec]


# ---------------------------------------------------------------------------
# single conditions
# ---------------------------------------------------------------------------


def _dims(model):
    return model.d


def _pairs(tup):
    return [(tup[2 * k], tup[2 * k + 1]) for k in range(len(tup) // 2)]


def regression_lhs(model: Model, grid, tup) -> complex:
    """Time-ordered multi-time bath trace for one index tuple."""
    grid = as_grid(grid)
    tup = check_tuple(tup, grid.m, _dims(model))
    if all(j == l for j, l in _pairs(tup)):
        return 1.0 + 0.0j
    if isinstance(model, GSBLevelSpec):
        return gsb_multitime_correlation(model, grid, tup)
    dts = grid.increments
    if model.diagonal:
        h = model.eigenvalues
        ph = sum(dt * (h[j] - h[l]) for dt, (j, l) in zip(dts, _pairs(tup)))
        return complex(np.dot(model.populations, np.exp(-1j * ph)))
    A = model.bath_state
    for dt, (j, l) in zip(dts, _pairs(tup)):
        U = model.propagators(dt)
        A = U[j] @ A @ U[l].conj().T
    return complex(np.trace(A))


def _phi_at(model, dt):
    if isinstance(model, GSBLevelSpec):
        d = model.d
        out = np.ones((d, d), dtype=np.complex128)
        for j in range(d):
            for l in range(j + 1, d):
                out[j, l] = dephasing_gsb(model, j, l, dt)
                out[l, j] = np.conj(out[j, l])
        return out
    return dephasing_matrix(model, dt).phi


def regression_rhs(model: Model, grid, tup) -> complex:
    """Product of single-interval dephasing functions ``prod_k phi_{j_k l_k}(dt_k)``."""
    grid = as_grid(grid)
    tup = check_tuple(tup, grid.m, _dims(model))
    out = 1.0 + 0.0j
    for dt, (j, l) in zip(grid.increments, _pairs(tup)):
        if j != l:
            out *= _phi_at(model, dt)[j, l]
    return complex(out)


# ---------------------------------------------------------------------------
# hierarchy sweep
# ---------------------------------------------------------------------------


def _conjugate(tup):
    return tuple(tup[i ^ 1] for i in range(len(tup)))


def enumerate_tuples(d, m, skip_reducible=True):
    """Independent index tuples of the ``m``-interval conditions.

    Returns ``(kept, counts)`` where ``kept`` is lexicographically ordered and
    ``counts`` records how many tuples were all-diagonal, conjugate
    duplicates, or reducible (diagonal last pair, which reduces by trace
    cyclicity to an ``m - 1`` condition on the truncated grid).
    """
    counts = {"total": 0, "all_diagonal": 0, "conjugate_duplicates": 0, "reducible": 0, "independent": 0}
    kept = []
    for tup in itertools.product(range(d), repeat=2 * m):
        counts["total"] += 1
        if all(tup[2 * k] == tup[2 * k + 1] for k in range(m)):
            counts["all_diagonal"] += 1
            continue
        if _conjugate(tup) < tup:
            counts["conjugate_duplicates"] += 1
            continue
        if skip_reducible and m > 1 and tup[-2] == tup[-1]:
            counts["reducible"] += 1
            continue
        kept.append(tup)
    counts["independent"] = len(kept)
    return kept, counts


def _flat_index(tup, d):
    i = 0
    for x in tup:
        i = i * d + x
    return i


def _rhs_tensor(model, grid):
    """``prod_k Phi(dt_k)[j_k, l_k]`` for every tuple, flat lexicographic order."""
    out = np.ones(1, dtype=np.complex128)
    for dt in grid.increments:
        out = np.multiply.outer(out, _phi_at(model, dt).reshape(-1)).reshape(-1)
    return out


def _lhs_tensor(model, grid, tuples):
    if isinstance(model, GSBLevelSpec):
        return None
    dts = np.ascontiguousarray(grid.increments)
    if model.diagonal:
        return kernels.diag_chain(
            np.ascontiguousarray(model.eigenvalues), np.ascontiguousarray(model.populations), dts
        )
    U = np.stack([model.propagators(dt) for dt in dts])
    return kernels.chain_tensor(U, model.bath_state)


def _weyl_batch(spec, grid, tuples):
    """Flat full-line correlations for many tuples on one grid (kernel matrix shared)."""
    m = grid.m
    e = grid.edges
    K = np.array([[kernel_integral(e[k + 1], e[k], e[h + 1], e[h]) for h in range(m)] for k in range(m)])
    T = np.asarray(tuples)
    c = spec.constants
    for tup in tuples:
        _check_equal_moduli(c, tup)
    fj, fl = c[T[:, 0::2]], c[T[:, 1::2]]
    dd = fj - fl
    logs = -0.5 * np.real(np.einsum("tk,th,kh->t", dd, dd.conj(), K))
    phase = np.zeros(len(T))
    for p in range(m):
        for q in range(p):
            phase += np.imag(K[p, q] * (fj[:, p] * np.conj(fj[:, q]) - fl[:, p] * np.conj(fl[:, q])))
    phase += np.imag(np.einsum("tp,tq,qp->t", fl.conj(), fj, K))
    ew = spec.energies
    lev = np.exp(-1j * ((ew[T[:, 0::2]] - ew[T[:, 1::2]]) @ grid.increments))
    return lev * np.exp(logs + 1j * phase)


def _halfline_batch(spec, grid, tuples):
    m = grid.m
    e = grid.edges
    c = spec.constants
    for tup in tuples:
        _check_equal_moduli(c, tup)
    r = _real_gauge(c)
    J = np.array([[_halfline_im_kernel(e, a, b) for b in range(m)] for a in range(m)])
    T = np.asarray(tuples)
    fj, fl = r[T[:, 0::2]], r[T[:, 1::2]]
    logs = -0.5 * np.pi * ((fj - fl) ** 2 @ grid.increments)
    phase = np.zeros(len(T))
    for p in range(m):
        for q in range(p):
            phase += J[q, p] * (fj[:, p] * fj[:, q] - fl[:, p] * fl[:, q])
    phase += np.einsum("tp,tq,pq->t", fl, fj, J)
    ew = spec.energies
    lev = np.exp(-1j * ((ew[T[:, 0::2]] - ew[T[:, 1::2]]) @ grid.increments))
    return lev * np.exp(logs + 1j * phase)


def _gsb_lhs(spec, grid, tuples):
    if not tuples:
        return np.zeros(0, dtype=np.complex128)
    if spec.kind == "flat-full-line":
        return _weyl_batch(spec, grid, tuples)
    if spec.kind == "flat-half-line":
        return _halfline_batch(spec, grid, tuples)
    return np.array([gsb_multitime_correlation(spec, grid, t) for t in tuples])


@dataclass(frozen=True)
class RegressionRow:
    grid_id: int
    grid: tuple
    tuple: tuple
    lhs: complex
    rhs: complex

    @property
    def m(self):
        return len(self.grid)

    @property
    def residual(self):
        return abs(self.lhs - self.rhs)

    @property
    def modulus_residual(self):
        return abs(abs(self.lhs) - abs(self.rhs))


@dataclass
class RegressionReport:
    """Rows of evaluated conditions plus aggregate statistics.

    ``counts[m]`` holds the enumeration counts of the ``m``-interval
    conditions per grid (identical for every grid).
    """

    rows: list
    tol: float
    counts: dict = field(default_factory=dict)
    seed: Optional[int] = None
    grids: list = field(default_factory=list)

    @property
    def max_residual(self):
        return max((r.residual for r in self.rows), default=0.0)

    @property
    def max_modulus_residual(self):
        return max((r.modulus_residual for r in self.rows), default=0.0)

    @property
    def n_conditions(self):
        return len(self.rows)

    @property
    def holds(self):
        """Regression satisfied on the sample: max residual below ``tol``."""
        return self.max_residual < self.tol

    @property
    def modulus_holds(self):
        return self.max_modulus_residual < self.tol

    def lookup(self, tup, grid_id=0):
        """Row for ``tup`` or its conjugate (which has the same residual)."""
        tup = tuple(tup)
        for r in self.rows:
            if r.grid_id == grid_id and r.tuple in (tup, _conjugate(tup)):
                return r
        raise KeyError(f"tuple {tup} not evaluated on grid {grid_id}")

    def max_residual_by_m(self):
        out = {}
        for r in self.rows:
            out[r.m] = max(out.get(r.m, 0.0), r.residual)
        return dict(sorted(out.items()))

    def summary(self):
        return {
            "max_residual": self.max_residual,
            "max_modulus_residual": self.max_modulus_residual,
            "n_conditions": self.n_conditions,
            "tol": self.tol,
            "holds": self.holds,
            "seed": self.seed,
            "counts": {str(k): v for k, v in self.counts.items()},
            "max_residual_by_m": {str(k): v for k, v in self.max_residual_by_m().items()},
        }


def check_hierarchy(
    model: Model,
    max_intervals: int,
    grids: Sequence,
    tol=1e-10,
    budget=DEFAULT_BUDGET,
    skip_reducible=True,
    seed=None,
) -> RegressionReport:
    """Evaluate all independent conditions with ``1 ... max_intervals`` intervals.

    Each grid must have at least ``max_intervals`` points; its prefixes supply
    the shorter grids.  Single-interval conditions are identities and produce
    no rows.

    Raises
    ------
    BudgetError
        If the number of enumerated tuples exceeds ``budget``.
    """
    grids = [as_grid(g) for g in grids]
    m_max = int(max_intervals)
    if m_max < 1:
        raise ModelError("max_intervals must be >= 1")
    for g in grids:
        if g.m < m_max:
            raise ModelError(f"grid {g.points} has fewer than {m_max} points")
    d = model.d
    needed = len(grids) * sum(d ** (2 * m) for m in range(2, m_max + 1))
    if needed > budget:
        raise BudgetError(
            f"hierarchy with d={d}, m<={m_max} on {len(grids)} grids needs {needed} tuple evaluations, "
            f"over the budget of {budget}"
        )
    rows = []
    counts = {}
    enumerated = {m: enumerate_tuples(d, m, skip_reducible) for m in range(1, m_max + 1)}
    for m, (_, c) in enumerated.items():
        counts[m] = dict(c)
        if m == 1:
            counts[m]["identities"] = c["independent"]
    for gid, g in enumerate(grids):
        for m in range(2, m_max + 1):
            tuples, _ = enumerated[m]
            sub = g.prefix(m)
            rhs_all = _rhs_tensor(model, sub)
            lhs_all = _lhs_tensor(model, sub, tuples)
            if lhs_all is None:
                lhs_sel = _gsb_lhs(model, sub, tuples)
            else:
                lhs_sel = [lhs_all[_flat_index(t, d)] for t in tuples]
            for tup, lhs in zip(tuples, lhs_sel):
                rows.append(RegressionRow(gid, sub.points, tup, complex(lhs), complex(rhs_all[_flat_index(tup, d)])))
    return RegressionReport(rows, tol, counts, seed, [g.points for g in grids])


NAMED_CONDITIONS = {
    "cond1": (0, 1, 0, 1),
    "cond2": (1, 0, 0, 1),
    "cond3": (0, 0, 0, 1),
    "cond4": (1, 1, 1, 0),
}


def n2_named_conditions(model: Model, t0, t1):
    """The four independent two-interval conditions of a qubit model on ``(t0, t1)``.

    ``cond1`` is the semigroup defect ``|phi(t1) - phi(t1 - t0) phi(t0)|``.

    Returns
    -------
    dict
        label -> RegressionRow
    """
    if not t1 >= t0 >= 0:
        raise ModelError("need t1 >= t0 >= 0")
    grid = TimeGrid([t0, t1])
    return {
        name: RegressionRow(0, grid.points, tup, regression_lhs(model, grid, tup), regression_rhs(model, grid, tup))
        for name, tup in NAMED_CONDITIONS.items()
    }


def random_grids(seed, n, m, t_max=5.0):
    """``n`` grids of ``m`` points whose increments are uniform on ``(0, t_max / m]``."""
    rng = np.random.default_rng(seed)
    return [TimeGrid(np.cumsum(t_max / m * (1.0 - rng.random(m)))) for _ in range(n)]


# ---------------------------------------------------------------------------
# interventions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Intervention:
    """System operation ``rho -> X rho Y`` applied at one grid time."""

    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        X = np.array(self.X, dtype=np.complex128)
        Y = np.array(self.Y, dtype=np.complex128)
        if X.shape != Y.shape or X.ndim != 2 or X.shape[0] != X.shape[1]:
            raise ModelError("intervention operators must be square and of equal size")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @classmethod
    def identity(cls, d):
        return cls(np.eye(d), np.eye(d))

    @classmethod
    def random(cls, rng, d):
        X = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        Y = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        return cls(X, Y)


def pauli_interventions(labels):
    """Interventions from label pairs such as ``[("X", "X"), ("X", "I")]``."""
    return [Intervention(PAULI[a], PAULI[b]) for a, b in labels]


def _check_interventions(interventions, m, d):
    if len(interventions) != m:
        raise ModelError(f"{len(interventions)} interventions for a grid of {m} intervals")
    for e in interventions:
        if e.X.shape != (d, d):
            raise ModelError(f"intervention of size {e.X.shape[0]} for d={d}")


def _rho(rho):
    return rho.entries if isinstance(rho, QuditState) else np.asarray(rho, dtype=np.complex128)


def intervention_lhs(model: BlockModel, rho, grid, interventions) -> complex:
    """Full system-bath evolution alternated with ``(X_k x 1)(.)(Y_k x 1)``, then the full trace."""
    if not isinstance(model, BlockModel):
        raise ModelError("intervention_lhs needs a finite BlockModel; use expansion_reconstruction")
    grid = as_grid(grid)
    d = model.d
    _check_interventions(interventions, grid.m, d)
    r = _rho(rho)
    if r.shape != (d, d):
        raise ModelError(f"state of shape {r.shape} for d={d}")
    if model.diagonal:
        h = model.eigenvalues
        sigma = model.populations[:, None, None] * r[None]
        for dt, e in zip(grid.increments, interventions):
            sigma = sigma * np.exp(-1j * dt * (h.T[:, :, None] - h.T[:, None, :]))
            sigma = e.X @ sigma @ e.Y
        return complex(np.trace(sigma, axis1=1, axis2=2).sum())
    n = model.bath_dim
    eye = np.eye(n)
    state = np.kron(r, model.bath_state)
    for dt, e in zip(grid.increments, interventions):
        U = np.zeros((d * n, d * n), dtype=np.complex128)
        P = model.propagators(dt)
        for j in range(d):
            U[j * n:(j + 1) * n, j * n:(j + 1) * n] = P[j]
        state = U @ state @ U.conj().T
        state = np.kron(e.X, eye) @ state @ np.kron(e.Y, eye)
    return complex(np.trace(state))


def intervention_rhs(source, rho, grid, interventions) -> complex:
    """Reduced-dynamics prediction ``Tr[E_{m-1} Lambda_{dt_{m-1}} ... E_0 Lambda_{t_0}(rho)]``.

    ``source`` is a BlockModel, a GSBLevelSpec, or a callable returning the
    dephasing matrix (array or DephasingMatrix) at a given time.
    """
    grid = as_grid(grid)
    r = _rho(rho)
    d = r.shape[0]
    _check_interventions(interventions, grid.m, d)
    if callable(source) and not isinstance(source, (BlockModel, GSBLevelSpec)):
        def phi(t):
            v = source(t)
            return v.phi if isinstance(v, DephasingMatrix) else np.asarray(v)
    else:
        def phi(t):
            return _phi_at(source, t)
    sigma = r.copy()
    for dt, e in zip(grid.increments, interventions):
        sigma = phi(dt) * sigma
        sigma = e.X @ sigma @ e.Y
    return complex(np.trace(sigma))


def expansion_reconstruction(model: Model, rho, grid, interventions, which="lhs") -> complex:
    """Intervention correlation rebuilt from the tuple expansion.

    ``sum_tuples c(tuple) * value(tuple)`` with system coefficients from
    :func:`dephaselab.kernels.expansion_coefficients` and ``value`` the
    multi-time bath trace (``which="lhs"``) or the product of dephasing
    functions (``which="rhs"``).
    """
    grid = as_grid(grid)
    d = model.d
    _check_interventions(interventions, grid.m, d)
    r = np.ascontiguousarray(_rho(rho))
    X = np.ascontiguousarray(np.stack([e.X for e in interventions]))
    Y = np.ascontiguousarray(np.stack([e.Y for e in interventions]))
    coef = kernels.expansion_coefficients(r, X, Y)
    if which == "rhs":
        vals = _rhs_tensor(model, grid)
    elif which == "lhs":
        vals = _lhs_tensor(model, grid, None)
        if vals is None:
            tuples = list(itertools.product(range(d), repeat=2 * grid.m))
            vals = _gsb_lhs(model, grid, tuples)
    else:
        raise ValueError("which must be 'lhs' or 'rhs'")
    return complex(np.dot(coef, vals))
