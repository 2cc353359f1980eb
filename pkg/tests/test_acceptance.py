"""Acceptance criteria, one test per criterion.

Reference values are closed forms written out here independently of the
library. Each test also enforces its runtime budget. Run on their own with
``pytest -m acceptance``; the terminal summary lists one PASS/FAIL line per
criterion.
"""

import time
from pathlib import Path

import numpy as np
import pytest

from qig.classical_info import cfim, coin_family, crb_monte_carlo, shannon_entropy
from qig.config import DEFAULTS, load_config
from qig.criticality_witness import (
    ScalingSeries,
    direction_averaged_qfi,
    fidelity_susceptibility_overlap,
    fidelity_susceptibility_perturbative,
    gap_inequality_check,
    mean_bound,
    producibility_bound,
    scaling_fit,
    tfim_series,
    witness_depth,
)
from qig.experiments import write_run
from qig.fluctuations_response import (
    classical_covariance,
    fluctuation_report,
    qfi_from_response,
    quantum_covariance,
    qv_from_response,
    qv_via_wyd_integral,
    random_instance,
    spectral_function,
)
from qig.manifold_topology import (
    bloch_family,
    chern_number,
    gauss_bonnet,
    metric_field,
    qwz_family,
    qwz_grid,
    sphere_grid,
    volume_chern_check,
)
from qig.quantum_core import (
    SIGMA_X,
    SIGMA_Z,
    collective_spin,
    ghz_state,
    gibbs_state,
    staggered_spin,
    tfim_chain,
    tfim_field_operator,
    variance,
)
from qig.state_geometry import qfi, qfim_spectral

pytestmark = pytest.mark.acceptance

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"


class Budget:
    """Context manager asserting a wall-clock limit in seconds."""

    def __init__(self, seconds: float):
        self.seconds = seconds

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
        if exc[0] is None:
            assert self.elapsed < self.seconds, f"took {self.elapsed:.1f} s, budget {self.seconds} s"


@pytest.mark.criterion("1  coin closed forms")
def test_criterion_01_coin_closed_forms():
    with Budget(1.0):
        fam = coin_family()
        assert shannon_entropy([0.5, 0.5]) == pytest.approx(1.0, abs=1e-12)
        assert cfim(fam, 0.5)[0, 0] == pytest.approx(1.0, abs=1e-12)
        for lam in np.linspace(0.01, 0.99, 99):
            assert cfim(fam, lam)[0, 0] == pytest.approx(1 / (4 * lam * (1 - lam)), abs=1e-10)


def qubit_closed_forms(x: float, phi: float) -> tuple[float, float, float, float]:
    # H = delta sigma_z, generator cos(phi) sigma_z + sin(phi) sigma_x, x = beta |delta|
    t, cz, sx = np.tanh(x), np.cos(phi), np.sin(phi)
    total = 1 - t**2 * cz**2
    thermal = cz**2 * (1 - t**2) + sx**2 * t / x
    quantum = sx**2 * (1 - t / x)
    fisher = 4 * t**2 * sx**2
    return total, thermal, quantum, fisher


@pytest.mark.criterion("2  single-qubit variances and QFI")
def test_criterion_02_single_qubit_suite():
    with Budget(1.0):
        for delta in (1.0, 0.5):
            for x in (0.1, 0.5, 1.0, 2.0, 5.0):
                for phi in (np.pi / 4, np.pi / 2):
                    gen = np.cos(phi) * SIGMA_Z + np.sin(phi) * SIGMA_X
                    rep = fluctuation_report(delta * SIGMA_Z, gen, x / delta)
                    got = (rep.total, rep.classical, rep.quantum, rep.qfi)
                    assert got == pytest.approx(qubit_closed_forms(x, phi), abs=1e-8)


def ensemble(n: int = 50, seed: int = 2024):
    rng = np.random.default_rng(seed)
    return [random_instance(rng, 1 + i % 2) for i in range(n)]


@pytest.mark.criterion("3  three-route quantum variance and sandwich")
def test_criterion_03_three_route_quantum_variance():
    with Budget(30.0):
        for h, a, beta in ensemble():
            rho = gibbs_state(h, beta)
            by_subtraction = variance(rho, a) - classical_covariance(h, a, a, beta)
            by_wyd = qv_via_wyd_integral(rho, a)
            by_response = qv_from_response(spectral_function(h, a, a, beta))
            assert by_wyd == pytest.approx(by_subtraction, abs=1e-7)
            assert by_response == pytest.approx(by_subtraction, abs=1e-7)
            assert quantum_covariance(h, a, a, beta) == pytest.approx(by_subtraction, abs=1e-12)
            f = qfi(rho, a)
            assert 4 * by_subtraction <= f + 1e-9
            assert f <= 12 * by_subtraction + 1e-9


@pytest.mark.criterion("4  response-function QFI identity")
def test_criterion_04_response_identity():
    with Budget(10.0):
        for h, a, beta in ensemble():
            spec = spectral_function(h, a, a, beta)
            assert qfi_from_response(spec) == pytest.approx(qfim_spectral(gibbs_state(h, beta), [a])[0, 0], abs=1e-10)


@pytest.mark.criterion("5  two-spin entanglement witness")
def test_criterion_05_two_spin_witness():
    with Budget(1.0):
        up, down = np.array([1.0, 0.0]), np.array([0.0, 1.0])
        singlet = (np.kron(up, down) - np.kron(down, up)) / np.sqrt(2)
        element, mean = producibility_bound(2, 1), mean_bound(2, 1)
        assert element / 2 == pytest.approx(1.0, abs=1e-12)
        assert mean == pytest.approx(4 / 3, abs=1e-12)
        assert qfi(singlet, staggered_spin("x", 2)) / 2 == pytest.approx(2.0, abs=1e-10)
        avg = direction_averaged_qfi(singlet, 2, staggered=True)
        assert avg == pytest.approx(4.0, abs=1e-10) and avg > mean
        for axis in "xyz":
            assert qfi(singlet, collective_spin(axis, 2)) == pytest.approx(0.0, abs=1e-10)
        for alpha in np.linspace(0.0, np.pi / 2, 50):
            product = np.kron(np.cos(alpha) * up + np.sin(alpha) * down, down)
            for build in (collective_spin, staggered_spin):
                for axis in "xyz":
                    assert qfi(product, build(axis, 2)) <= element + 1e-10
            for staggered in (False, True):
                assert direction_averaged_qfi(product, 2, staggered=staggered) <= mean + 1e-10


@pytest.mark.criterion("6  GHZ maximality")
def test_criterion_06_ghz_maximality():
    with Budget(5.0):
        for n in range(2, 9):
            f = qfi(ghz_state(n), collective_spin("z", n))
            assert f == pytest.approx(n**2, abs=1e-10)
            assert witness_depth(f, n).depth == n


@pytest.mark.criterion("7  fidelity susceptibility oracles and gap inequality")
def test_criterion_07_fidelity_susceptibility():
    with Budget(60.0):
        for delta in (0.3, 1.0, 2.5):
            h = delta * SIGMA_Z
            assert fidelity_susceptibility_perturbative(h, SIGMA_X) == pytest.approx(1 / (4 * delta**2), rel=1e-10)
            assert gap_inequality_check(h, SIGMA_X).holds
        for L in (4, 6, 8):
            op = tfim_field_operator(L)
            for g in (0.5, 1.0, 1.5):
                h = tfim_chain(L, g)
                pert = fidelity_susceptibility_perturbative(h, op)
                assert pert == pytest.approx(fidelity_susceptibility_overlap(h, op), abs=1e-6)
                assert gap_inequality_check(h, op).holds


@pytest.fixture(scope="module")
def tfim_critical_series():
    return tfim_series([8, 10, 12, 14], g=1.0)


@pytest.mark.criterion("8a TFIM fidelity-susceptibility density exponent")
def test_criterion_08a_fs_density_exponent(tfim_critical_series):
    with Budget(600.0):
        fs, _ = tfim_critical_series
        assert scaling_fit(fs).exponent == pytest.approx(1.0, abs=0.2)


@pytest.mark.criterion("8b TFIM energy-susceptibility exponent")
def test_criterion_08b_energy_susceptibility_exponent(tfim_critical_series):
    with Budget(600.0):
        _, es = tfim_critical_series
        assert isinstance(es, ScalingSeries)
        assert scaling_fit(es).exponent == pytest.approx(0.0, abs=0.25)


@pytest.mark.criterion("9  topology: Chern numbers, volume bound, Bloch sphere")
def test_criterion_09_topology():
    with Budget(120.0):
        grid = qwz_grid()
        expected = {1.0: 1, -1.0: 1, 1.5: 1, -1.5: 1, 3.0: 0, -3.0: 0, 0.5: 1, -0.5: 1}
        for m, magnitude in expected.items():
            check = volume_chern_check(qwz_family(m), grid)
            assert isinstance(check.chern, int) and abs(check.chern) == magnitude
            assert check.holds and check.volume >= np.pi * abs(check.chern) - 1e-6
        sphere = sphere_grid()
        family = bloch_family()
        rep = gauss_bonnet(metric_field(family, sphere))
        assert rep.volume == pytest.approx(np.pi, abs=1e-6)
        assert rep.euler == pytest.approx(2.0, abs=0.02)
        assert np.max(np.abs(rep.K[rep.interior] - 4.0)) < 1e-3
        assert abs(chern_number(family, sphere, sphere_closure=True)) == 1


@pytest.mark.criterion("10 Cramer-Rao Monte Carlo on the coin")
def test_criterion_10_cramer_rao_monte_carlo():
    with Budget(10.0):
        trials = 2000
        # the sample variance of the estimates has relative spread sqrt(2 / (trials - 1))
        slack = 3 * np.sqrt(2 / (trials - 1))
        for lam, seed in ((0.5, 7), (0.3, 8)):
            run = crb_monte_carlo(coin_family(), lam, samples=1000, trials=trials, seed=seed)
            assert run.crb == pytest.approx(lam * (1 - lam) / 1000, rel=1e-10)
            ratio = run.empirical_variance / run.crb
            assert abs(ratio - 1) < 0.1
            assert ratio >= 1 - slack


@pytest.mark.criterion("11 determinism of experiment outputs")
def test_criterion_11_determinism(tmp_path):
    for name in sorted(DEFAULTS):
        cfg = load_config(CONFIG_DIR / f"{name}.toml")
        for threads in (1, 2):
            first = write_run(cfg, tmp_path / name / f"{threads}a", threads)
            second = write_run(cfg, tmp_path / name / f"{threads}b", threads)
            for a, b in zip(first["outputs"], second["outputs"], strict=True):
                assert a["sha256"] == b["sha256"], f"{name} {a['file']} differs at {threads} threads"
                text_a = (tmp_path / name / f"{threads}a" / a["file"]).read_bytes()
                text_b = (tmp_path / name / f"{threads}b" / b["file"]).read_bytes()
                assert text_a == text_b
