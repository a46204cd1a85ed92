import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dephaselab.errors import ModelError
from dephaselab.model import (
    BlockModel,
    DephasingMatrix,
    DephasingTrajectory,
    QuditState,
    SpectralMeasure,
    apply_channel,
    cauchy_measure,
    coherence,
    commuting_dephasing,
    dephasing_matrix,
    expm_hermitian,
    make_h_func,
    random_block_model,
    random_density,
    random_hermitian,
    reduced_dynamics_oracle,
    trajectory,
)

SX = np.array([[0, 1], [1, 0]], dtype=complex)
PLUS = QuditState(0.5 * np.ones((2, 2)))


def test_identical_blocks_give_trivial_dephasing(rng):
    H = random_hermitian(rng, 3)
    model = BlockModel([H, H], random_density(rng, 3))
    for t in (0.0, 0.7, 3.1):
        assert np.abs(dephasing_matrix(model, t).phi - 1).max() < 1e-12


def test_time_zero_is_all_ones(rng):
    model = random_block_model(rng, 3, 4)
    assert np.array_equal(dephasing_matrix(model, 0.0).phi, np.ones((3, 3)))


def test_two_by_two_taylor_oracle():
    # <0| e^{i H1} e^{-i H0} |0> by truncated Taylor series
    H0 = np.diag([0.0, 1.0]).astype(complex)
    H1 = SX

    def taylor(A, terms=60):
        out, term = np.eye(2, dtype=complex), np.eye(2, dtype=complex)
        for k in range(1, terms):
            term = term @ A / k
            out = out + term
        return out

    ref = (taylor(1j * H1) @ taylor(-1j * H0))[0, 0]
    model = BlockModel([H0, H1], np.diag([1.0, 0.0]))
    assert abs(dephasing_matrix(model, 1.0).phi[0, 1] - ref) < 1e-13


def test_apply_channel_identity_and_damping():
    rho = QuditState(np.array([[0.5, 0.5], [0.5, 0.5]]))
    assert np.abs(apply_channel(DephasingMatrix.ones(2), rho).entries - rho.entries).max() == 0
    phi = np.array([[1, np.exp(-1)], [np.exp(-1), 1]])
    out = apply_channel(DephasingMatrix(phi, 1.0), rho).entries
    assert abs(out[0, 1] - 0.5 * np.exp(-1)) < 1e-15
    assert np.abs(np.diag(out) - 0.5).max() == 0


def test_oracle_equivalence_100_models():
    rng = np.random.default_rng(20240601)
    worst = 0.0
    for _ in range(100):
        d, n = int(rng.integers(2, 4)), int(rng.integers(1, 5))
        model = random_block_model(rng, d, n)
        rho = QuditState(random_density(rng, d))
        t = float(rng.uniform(0, 3))
        a = apply_channel(dephasing_matrix(model, t), rho).entries
        b = reduced_dynamics_oracle(model, rho, t).entries
        worst = max(worst, np.abs(a - b).max())
    assert worst < 1e-10


def test_oracle_trivial_cases(rng):
    model = random_block_model(rng, 2, 3)
    rho = QuditState(random_density(rng, 2))
    assert np.abs(reduced_dynamics_oracle(model, rho, 0.0).entries - rho.entries).max() < 1e-12
    H = random_hermitian(rng, 3)
    same = BlockModel([H, H], random_density(rng, 3))
    assert np.abs(reduced_dynamics_oracle(same, rho, 2.3).entries - rho.entries).max() < 1e-12


def test_coherence_values():
    assert coherence(QuditState(np.diag([0.3, 0.7]))) == 0
    assert abs(coherence(PLUS) - 1) < 1e-15
    phi = DephasingMatrix(np.array([[1, np.exp(-1)], [np.exp(-1), 1]]), 1.0)
    assert abs(coherence(apply_channel(phi, PLUS)) - np.exp(-1)) < 1e-15


def test_commuting_trivial_and_split():
    mu = cauchy_measure(1.0, n_atoms=20_000, radius=200.0)
    same = commuting_dephasing(mu, [{"kind": "linear", "scale": 0.5}] * 2, 1.3)
    assert np.abs(same.phi - 1).max() < 1e-12
    lin = [{"kind": "linear", "scale": 0.5}, {"kind": "linear", "scale": -0.5}]
    split = [{"kind": "split-positive", "part": "positive"}, {"kind": "split-positive", "part": "negative"}]
    for t in (0.5, 1.0, 4.0):
        a = commuting_dephasing(mu, lin, t).phi[0, 1]
        b = commuting_dephasing(mu, split, t).phi[0, 1]
        # h_0 - h_1 = x in both cases, and t x/2 - (-t x/2) = t x
        assert abs(a - b) < 1e-10


def test_cauchy_default_grid_is_exponential():
    mu = cauchy_measure(1.0)
    t = np.linspace(0, 5, 26)
    phi = trajectory(BlockModel.from_measure(mu, [make_h_func({"kind": "linear", "scale": 0.5}),
                                                   make_h_func({"kind": "linear", "scale": -0.5})]), t)
    assert np.abs(phi.series(0, 1) - np.exp(-t / 2)).max() < 1e-3


def test_cauchy_spec_defaults_within_tail_bound():
    # radius 200, 1e5 atoms: error is dominated by the truncated tail mass
    # 1 - (2/pi) arctan(R / (gamma/2)) plus the midpoint aliasing term
    gamma, R = 1.0, 200.0
    mu = cauchy_measure(gamma, radius=R * gamma, n_atoms=100_000)
    tail = 1 - 2 / np.pi * np.arctan(R / (gamma / 2))
    t = np.linspace(0, 5, 26)
    lin = [{"kind": "linear", "scale": 0.5}, {"kind": "linear", "scale": -0.5}]
    err = max(abs(commuting_dephasing(mu, lin, s).phi[0, 1] - np.exp(-s / 2)) for s in t)
    assert err < 2 * tail


@given(st.integers(0, 2**32 - 1), st.floats(0.0, 5.0))
def test_gram_properties(seed, t):
    rng = np.random.default_rng(seed)
    d, n = int(rng.integers(2, 4)), int(rng.integers(1, 5))
    phi = dephasing_matrix(random_block_model(rng, d, n), t).phi
    assert np.all(np.diag(phi) == 1)
    assert np.abs(phi - phi.conj().T).max() < 1e-12
    assert np.abs(phi).max() <= 1 + 1e-12
    assert np.linalg.eigvalsh(phi).min() >= -1e-10


@given(st.integers(0, 2**32 - 1), st.floats(0.0, 5.0))
def test_channel_preserves_trace_hermiticity_psd(seed, t):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, 4))
    model = random_block_model(rng, d, int(rng.integers(1, 5)))
    rho = QuditState(random_density(rng, d))
    out = apply_channel(dephasing_matrix(model, t), rho).entries
    assert abs(np.trace(out) - 1) < 1e-12
    assert np.abs(out - out.conj().T).max() < 1e-12
    assert np.linalg.eigvalsh(out).min() > -1e-12


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.0, 5.0))
def test_commuting_gauge_invariance(a, b, t):
    mu = SpectralMeasure(np.linspace(-3, 3, 31), np.ones(31) / 31)
    g = make_h_func({"kind": "linear", "scale": a, "offset": b})
    h0, h1 = make_h_func({"kind": "linear", "scale": 0.7}), make_h_func({"kind": "split-positive"})
    ref = commuting_dephasing(mu, [h0, h1], t).phi
    shifted = commuting_dephasing(mu, [lambda x: h0(x) + g(x), lambda x: h1(x) + g(x)], t).phi
    assert np.abs(ref - shifted).max() < 1e-12


def test_trajectory_invariants(rng):
    traj = trajectory(random_block_model(rng, 3, 2), np.linspace(0, 4, 9))
    assert np.array_equal(traj.phis[0], np.ones((3, 3)))
    assert np.abs(traj.phis).max() <= 1 + 1e-12


def test_expm_unitarity(rng):
    U = expm_hermitian(random_hermitian(rng, 6, 10.0), 3.7)
    assert np.abs(U.conj().T @ U - np.eye(6)).max() < 1e-12


def test_validation_errors(rng):
    with pytest.raises(ModelError):
        BlockModel([np.eye(2), np.eye(3)], np.eye(2) / 2)
    with pytest.raises(ModelError):
        BlockModel([np.eye(2), np.eye(2)], np.eye(3) / 3)
    with pytest.raises(ModelError):
        QuditState(np.array([[1.0, 0.0], [0.0, 0.5]]))
    with pytest.raises(ModelError):
        QuditState(np.array([[0.5, 1.0], [1.0, 0.5]]))
    with pytest.raises(ModelError):
        BlockModel([np.array([[0, 1j], [0, 0]]), np.eye(2)], np.eye(2) / 2)
    with pytest.raises(ModelError):
        apply_channel(DephasingMatrix.ones(3), PLUS)
    with pytest.raises(ModelError):
        commuting_dephasing(SpectralMeasure(np.array([]), np.array([])), [np.sin, np.cos], 1.0)
    with pytest.raises(ModelError):
        DephasingTrajectory(np.array([0.0, 1.0, 1.0]), np.ones((3, 2, 2)))
    with pytest.raises(ModelError):
        make_h_func({"kind": "cubic"})


def test_state_is_immutable():
    with pytest.raises((AttributeError, ValueError, TypeError)):
        PLUS.entries[0, 0] = 2.0
