import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qig.classical_info import bhattacharyya_distance, cfim, classical_fidelity, ClassicalFamily
from qig.errors import BoundaryDivergenceError, NonDifferentiableError, UnphysicalTangentError
from qig.fluctuations_response import quantum_covariance
from qig.quantum_core import (
    IDENTITY_2,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    collective_spin,
    ghz_state,
    gibbs_state,
    projector,
    random_density_matrix,
    random_hermitian,
    random_pure_state,
    variance,
)
from qig.state_geometry import (
    GeometricTensor,
    MonotoneFunction,
    QuantumFamily,
    bures_distance,
    qfi,
    qfim_mixed,
    qfim_monotone,
    qfim_spectral,
    qfim_unitary_pure,
    qgt_pure,
    quantum_angle,
    sld,
    uhlmann_fidelity,
    unitary_tangent,
)


def bloch(lam):
    t, p = lam
    return np.array([np.cos(t / 2), np.exp(1j * p) * np.sin(t / 2)])


BLOCH = QuantumFamily(2, bloch)


def qubit_generator(phi, azimuth=0.3):
    n = np.array([np.cos(azimuth) * np.sin(phi), np.sin(azimuth) * np.sin(phi), np.cos(phi)])
    return n[0] * SIGMA_X + n[1] * SIGMA_Y + n[2] * SIGMA_Z


# --- geometric tensor ---------------------------------------------------------


@pytest.mark.parametrize("theta", [0.4, 1.1, 2.5])
def test_bloch_metric_and_curvature(theta):
    q = qgt_pure(BLOCH, [theta, 0.8])
    assert np.allclose(q.metric, np.diag([0.25, np.sin(theta) ** 2 / 4]), atol=1e-9)
    assert q.berry[0, 1] == pytest.approx(np.sin(theta) / 2, abs=1e-9)
    assert q.berry[1, 0] == pytest.approx(-np.sin(theta) / 2, abs=1e-9)


def test_constant_family_has_zero_tensor():
    fam = QuantumFamily(2, lambda lam: np.array([0.6, 0.8j]))
    assert np.allclose(qgt_pure(fam, [0.1, 0.2]).tensor, 0.0, atol=1e-12)


def test_two_level_ground_state_family():
    delta = 0.7

    def ground(lam):
        return np.linalg.eigh(delta * SIGMA_Z + lam[0] * SIGMA_X)[1][:, 0]

    q = qgt_pure(QuantumFamily(1, ground), [0.0])
    assert q.tensor[0, 0].real == pytest.approx(1 / (4 * delta**2), rel=1e-8)


def test_generator_mode_matches_central_differences():
    from scipy.linalg import expm

    rng = np.random.default_rng(0)
    gens = [random_hermitian(3, rng) for _ in range(2)]
    psi0 = random_pure_state(3, rng)
    fam = QuantumFamily(
        2,
        lambda lam: expm(-1j * (lam[0] * gens[0] + lam[1] * gens[1])) @ psi0,
        generators=gens,
    )
    # at the origin the tangent vectors are exactly -i G psi0
    central = qgt_pure(fam, [0.0, 0.0], mode="central").tensor
    exact = qgt_pure(fam, [0.0, 0.0], mode="generators").tensor
    assert np.allclose(central, exact, atol=1e-8)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_qgt_gauge_invariance(seed):
    rng = np.random.default_rng(seed)
    c = rng.normal(size=3)
    fam = QuantumFamily(2, lambda lam: np.exp(1j * (c[0] * lam[0] + c[1] * lam[1] ** 2 + c[2] * np.sin(lam[0] * lam[1]))) * bloch(lam))
    lam = rng.uniform([0.3, 0.0], [2.8, 6.0])
    assert np.allclose(qgt_pure(fam, lam).tensor, qgt_pure(BLOCH, lam).tensor, atol=1e-8)


def test_non_differentiable_point_detected():
    fam = QuantumFamily(1, lambda lam: np.array([np.cos(abs(lam[0])), np.sin(abs(lam[0]))]))
    with pytest.raises(NonDifferentiableError):
        qgt_pure(fam, [0.0])


def test_geometric_tensor_validation():
    with pytest.raises(ValueError):
        GeometricTensor(np.array([[1.0, 1.0], [0.0, 1.0]]))


# --- pure-state QFIM -----------------------------------------------------------


@pytest.mark.parametrize("n", range(2, 9))
def test_ghz_qfi_is_n_squared(n):
    assert qfim_unitary_pure(ghz_state(n), [collective_spin("z", n)])[0, 0] == pytest.approx(n**2, abs=1e-10)


def test_eigenstate_and_singlet_have_zero_qfi():
    assert qfi(np.array([1.0, 0.0]), SIGMA_Z) == pytest.approx(0.0, abs=1e-14)
    singlet = np.array([0, 1, -1, 0]) / np.sqrt(2)
    f = qfim_unitary_pure(singlet, [collective_spin(a, 2) for a in "xyz"])
    assert np.allclose(f, 0.0, atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.1, 5.0))
def test_generator_scaling_is_quadratic(seed, c):
    rng = np.random.default_rng(seed)
    psi, a = random_pure_state(4, rng), random_hermitian(4, rng)
    assert qfi(psi, c * a) == pytest.approx(c**2 * qfi(psi, a), rel=1e-10, abs=1e-12)


def test_pure_qfi_additive_on_products():
    rng = np.random.default_rng(3)
    a, b = random_pure_state(2, rng), random_pure_state(2, rng)
    gen = np.kron(SIGMA_X, IDENTITY_2) + np.kron(IDENTITY_2, SIGMA_Y)
    assert qfi(np.kron(a, b), gen) == pytest.approx(qfi(a, SIGMA_X) + qfi(b, SIGMA_Y), abs=1e-12)


# --- SLD and mixed states -------------------------------------------------------


def test_sld_diagonal_is_classical_log_derivative():
    p, dp = np.array([0.2, 0.3, 0.5]), np.array([0.1, -0.4, 0.3])
    assert np.allclose(sld(np.diag(p), np.diag(dp)), np.diag(dp / p))


def test_sld_reconstructs_unitary_tangent():
    rho = gibbs_state(0.8 * SIGMA_Z, 1.3)
    t = unitary_tangent(rho, qubit_generator(0.9))
    ell = sld(rho, t)
    assert np.linalg.norm(0.5 * (rho @ ell + ell @ rho) - t) < 1e-10


def test_sld_on_pure_state_gives_four_variance():
    rng = np.random.default_rng(4)
    psi, a = random_pure_state(3, rng), random_hermitian(3, rng)
    res = qfim_mixed(projector(psi), [unitary_tangent(projector(psi), a)])
    assert res.qfim[0, 0] == pytest.approx(4 * variance(psi, a), rel=1e-10)


def test_sld_rejects_unphysical_tangent():
    rho = np.diag([1.0, 0.0])
    with pytest.raises(UnphysicalTangentError):
        sld(rho, np.diag([-1.0, 1.0]))


@pytest.mark.parametrize("x", [0.1, 0.5, 1.0, 2.0, 5.0])
@pytest.mark.parametrize("phi", [np.pi / 4, np.pi / 2])
def test_qubit_unitary_qfi_closed_form(x, phi):
    rho = gibbs_state(SIGMA_Z, x)
    res = qfim_mixed(rho, [unitary_tangent(rho, qubit_generator(phi))])
    assert res.unitary[0, 0] == pytest.approx(4 * np.tanh(x) ** 2 * np.sin(phi) ** 2, abs=1e-10)
    assert res.non_unitary[0, 0] == pytest.approx(0.0, abs=1e-12)
    assert res.qfim[0, 0] == pytest.approx(res.unitary[0, 0] + res.non_unitary[0, 0], abs=1e-8)
    assert qfim_spectral(rho, [qubit_generator(phi)])[0, 0] == pytest.approx(res.qfim[0, 0], abs=1e-10)


def test_maximally_mixed_has_zero_qfi():
    rho = np.eye(2) / 2
    assert qfim_mixed(rho, [unitary_tangent(rho, SIGMA_X)]).qfim[0, 0] == pytest.approx(0.0, abs=1e-14)


def test_diagonal_family_reduces_to_classical_metric():
    p = np.array([0.2, 0.3, 0.5])
    dp = np.array([[0.1, 0.05], [-0.4, 0.0], [0.3, -0.05]])
    res = qfim_mixed(np.diag(p), [np.diag(dp[:, 0]), np.diag(dp[:, 1])])
    fam = ClassicalFamily(2, lambda lam: p + dp @ lam, derivative=lambda lam: dp)
    assert np.allclose(res.bures_metric, cfim(fam, [0.0, 0.0]), atol=1e-12)
    assert np.allclose(res.unitary, 0.0, atol=1e-14)


def test_split_sums_to_sld_on_random_mixed_states():
    rng = np.random.default_rng(5)
    for _ in range(20):
        rho = random_density_matrix(3, rng)
        tangents = [random_hermitian(3, rng) for _ in range(2)]
        tangents = [t - np.trace(t) / 3 * np.eye(3) for t in tangents]
        res = qfim_mixed(rho, tangents)
        assert np.allclose(res.unitary + res.non_unitary, res.qfim, atol=1e-8)
        assert np.all(np.linalg.eigvalsh(res.qfim) > -1e-9)


def test_qfi_is_convex():
    rng = np.random.default_rng(6)
    for dim in (2, 4):
        for _ in range(20):
            r1, r2 = random_density_matrix(dim, rng), random_density_matrix(dim, rng)
            a = random_hermitian(dim, rng)
            w = rng.uniform()
            mixed = qfi(w * r1 + (1 - w) * r2, a)
            assert mixed <= w * qfi(r1, a) + (1 - w) * qfi(r2, a) + 1e-9


def test_four_qv_below_sld_qfi():
    rng = np.random.default_rng(7)
    for _ in range(20):
        h, a = random_hermitian(2, rng), random_hermitian(2, rng)
        beta = rng.uniform(0.1, 3)
        assert 4 * quantum_covariance(h, a, a, beta) <= qfi(gibbs_state(h, beta), a) + 1e-10


# --- monotone metrics ---------------------------------------------------------


def test_monotone_sld_matches_qfim_mixed():
    rng = np.random.default_rng(8)
    rho = random_density_matrix(3, rng)
    t = [unitary_tangent(rho, random_hermitian(3, rng)) for _ in range(2)]
    assert np.allclose(qfim_monotone(rho, t, MonotoneFunction.sld()), qfim_mixed(rho, t).qfim, atol=1e-10)


def test_wyd_half_between_quantum_variance_and_sld():
    h, a, beta = SIGMA_Z, qubit_generator(np.pi / 3), 1.2
    rho = gibbs_state(h, beta)
    wyd = qfim_monotone(rho, [unitary_tangent(rho, a)], MonotoneFunction.wyd(0.5))[0, 0]
    assert 4 * quantum_covariance(h, a, a, beta) < wyd < qfi(rho, a)


def test_monotone_metric_ordering_on_mixed_qubit():
    rng = np.random.default_rng(9)
    rho = random_density_matrix(2, rng)
    t = [unitary_tangent(rho, random_hermitian(2, rng))]
    sld_v = qfim_monotone(rho, t, MonotoneFunction.sld())[0, 0]
    bkm_v = qfim_monotone(rho, t, MonotoneFunction.bkm())[0, 0]
    # SLD is the smallest monotone metric at fixed f(0) normalization
    assert sld_v <= bkm_v * 2 + 1e-12
    assert qfim_monotone(rho, t, MonotoneFunction.rld())[0, 0] >= sld_v / 2


def test_pure_state_monotone_metrics():
    rng = np.random.default_rng(10)
    psi, a = random_pure_state(3, rng), random_hermitian(3, rng)
    rho = projector(psi)
    t = [unitary_tangent(rho, a)]
    for spec in (MonotoneFunction.sld(), MonotoneFunction.wyd(0.3), MonotoneFunction.wyd(0.5)):
        assert qfim_monotone(rho, t, spec)[0, 0] == pytest.approx(4 * variance(psi, a), rel=1e-10)
    for spec in (MonotoneFunction.bkm(), MonotoneFunction.rld(), MonotoneFunction.lld()):
        with pytest.raises(BoundaryDivergenceError):
            qfim_monotone(rho, t, spec)


def test_monotone_function_specs():
    for spec in (MonotoneFunction.sld(), MonotoneFunction.bkm(), MonotoneFunction.wyd(0.25), MonotoneFunction.rld()):
        assert float(spec(np.array(1.0))) == pytest.approx(1.0)
    custom = MonotoneFunction.custom(lambda x: 3 * (1 + x))
    assert float(custom(np.array(1.0))) == pytest.approx(1.0)
    assert custom.f_at_zero == pytest.approx(0.5)
    with pytest.raises(ValueError):
        MonotoneFunction.wyd(1.0)


# --- distances ---------------------------------------------------------------


def test_fidelity_examples():
    rng = np.random.default_rng(11)
    rho = random_density_matrix(3, rng)
    assert uhlmann_fidelity(rho, rho) == pytest.approx(1.0, abs=1e-10)
    assert bures_distance(rho, rho) == pytest.approx(0.0, abs=1e-5)
    up, down = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    assert uhlmann_fidelity(projector(up), projector(down)) == pytest.approx(0.0, abs=1e-14)
    assert quantum_angle(up, down) == pytest.approx(np.pi / 2)


def test_fidelity_symmetric_and_commuting_reduction():
    rng = np.random.default_rng(12)
    r1, r2 = random_density_matrix(3, rng), random_density_matrix(3, rng)
    assert uhlmann_fidelity(r1, r2) == pytest.approx(uhlmann_fidelity(r2, r1), abs=1e-10)
    p, q = rng.dirichlet(np.ones(4)), rng.dirichlet(np.ones(4))
    assert uhlmann_fidelity(np.diag(p), np.diag(q)) == pytest.approx(classical_fidelity(p, q) ** 2, abs=1e-12)
    assert bures_distance(np.diag(p), np.diag(q)) == pytest.approx(bhattacharyya_distance(p, q), abs=1e-10)


def test_bures_reduces_to_quantum_angle_on_pure_states():
    rng = np.random.default_rng(13)
    for _ in range(10):
        a, b = random_pure_state(3, rng), random_pure_state(3, rng)
        assert bures_distance(a, b) == pytest.approx(quantum_angle(a, b), abs=1e-10)
