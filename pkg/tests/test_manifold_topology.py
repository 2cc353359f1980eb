import numpy as np
import pytest

from qig.errors import BandDegeneracyError, IllConditionedManifoldError, NonConvergenceError
from qig.manifold_topology import (
    Grid2D,
    MetricField,
    _simpson_weights,
    berry_curvature_field,
    bloch_family,
    chern_number,
    chern_number_riemann,
    curvature_from_volume_scaling,
    gauss_bonnet,
    manifold_volume,
    metric_field,
    plaquette_fluxes,
    qwz_family,
    qwz_grid,
    sphere_grid,
    volume_chern_check,
)
from qig.quantum_core import SIGMA_Z, heisenberg_chain
from qig.state_geometry import QuantumFamily


def torus_family() -> QuantumFamily:
    # two independent equal-weight phase qubits: constant metric I/4 on the torus
    def evaluate(lam):
        a = np.array([np.exp(1j * lam[0]), 1.0]) / np.sqrt(2)
        b = np.array([np.exp(1j * lam[1]), 1.0]) / np.sqrt(2)
        return np.kron(a, b)

    return QuantumFamily(2, evaluate)


def rephased(family: QuantumFamily, seed: int) -> QuantumFamily:
    """Same rays with a pseudo-random phase attached to every parameter point."""

    def evaluate(lam):
        key = np.round(np.asarray(lam) * 1e6).astype(np.int64)
        rng = np.random.default_rng([seed, *(int(k) % 2**31 for k in key)])
        return np.exp(2j * np.pi * rng.random()) * family.state(lam)

    return QuantumFamily(2, evaluate)


def torus_grid(n: int = 32) -> Grid2D:
    return Grid2D(((0.0, 2 * np.pi), (0.0, 2 * np.pi)), (n, n), (True, True))


# --- grids -----------------------------------------------------------------------


@pytest.mark.parametrize("n", [9, 10, 17, 30])
def test_simpson_weights_integrate_cubics_exactly(n):
    x = np.linspace(0.0, 2.0, n)
    w = _simpson_weights(n, x[1] - x[0])
    assert w.sum() == pytest.approx(2.0, rel=1e-14)
    assert w @ x**3 == pytest.approx(4.0, rel=1e-12)


def test_grid_validation_and_axes():
    with pytest.raises(ValueError):
        Grid2D(((0, 1), (0, 1)), (7, 8))
    with pytest.raises(ValueError):
        Grid2D(((1, 0), (0, 1)), (8, 8))
    g = Grid2D(((0, 1), (0, 2 * np.pi)), (9, 16), (False, True))
    assert g.axis(0)[-1] == 1.0
    assert g.axis(1)[-1] < 2 * np.pi
    assert g.points().shape == (9, 16, 2)
    assert g.refined().shape == (17, 32)
    assert g.refined().coarsened() == g


# --- Berry curvature and Chern numbers ----------------------------------------------


def test_bloch_berry_curvature_matches_closed_form():
    grid = sphere_grid(33, 16)
    omega = berry_curvature_field(bloch_family(), grid)
    theta = grid.points()[..., 0]
    assert np.allclose(np.abs(omega), np.sin(theta) / 2, atol=1e-8)


def test_constant_family_is_trivial():
    const = QuantumFamily(2, lambda lam: np.array([1.0, 1j]) / np.sqrt(2))
    grid = torus_grid(16)
    assert np.allclose(berry_curvature_field(const, grid), 0.0)
    assert chern_number(const, grid) == 0
    check = volume_chern_check(const, grid)
    assert check.volume == pytest.approx(0.0, abs=1e-12) and check.chern == 0 and check.holds


def test_qwz_curvature_peaks_where_the_gap_is_smallest():
    # at m = 1 the vector d(k) is shortest at k = (pi, pi), where |Omega| = 1 / (2 |d|^2) = 1/2;
    # at k = (0, 0) it is 3 / (2 * 27)
    grid = qwz_grid(32)
    omega = berry_curvature_field(qwz_family(1.0), grid)
    i, j = np.unravel_index(np.argmax(np.abs(omega)), omega.shape)
    assert (i, j) == (16, 16)
    assert abs(omega[16, 16]) == pytest.approx(0.5, abs=1e-6)
    assert abs(omega[0, 0]) == pytest.approx(3 / 54, abs=1e-6)


@pytest.mark.parametrize("m, expected", [(1.0, 1), (1.5, 1), (0.5, 1), (3.0, 0)])
def test_qwz_chern_numbers(m, expected):
    grid = qwz_grid()
    assert abs(chern_number(qwz_family(m), grid)) == expected
    assert abs(chern_number(qwz_family(-m), grid)) == expected


def test_qwz_chern_sign_flips_with_mass():
    grid = qwz_grid(32)
    assert chern_number(qwz_family(1.0), grid) == -chern_number(qwz_family(-1.0), grid)


def test_band_complements_sum_to_zero():
    grid = qwz_grid(32)
    for m in (1.0, -1.5, 3.0):
        lower = np.sum(plaquette_fluxes(qwz_family(m, 0), grid))
        upper = np.sum(plaquette_fluxes(qwz_family(m, 1), grid))
        assert abs(lower + upper) / (2 * np.pi) < 1e-12


def test_degenerate_band_is_reported():
    with pytest.raises(BandDegeneracyError):
        chern_number(qwz_family(-2.0), qwz_grid(16))


@pytest.mark.slow
@pytest.mark.parametrize("m", [1.0, 3.0])
def test_riemann_sum_rounds_to_lattice_chern_at_two_resolutions(m):
    family = qwz_family(m)
    for n in (64, 128):
        grid = qwz_grid(n)
        c = chern_number(family, grid)
        assert abs(chern_number_riemann(family, grid) - c) < 0.02


def test_bloch_sphere_chern_number():
    assert abs(chern_number(bloch_family(), sphere_grid(), sphere_closure=True)) == 1
    with pytest.raises(ValueError):
        chern_number(bloch_family(), sphere_grid())


def test_open_surface_is_not_integral():
    with pytest.raises(NonConvergenceError):
        chern_number(bloch_family(), sphere_grid(65, 32, polar_max=np.pi / 2), sphere_closure=True)


def test_lattice_outputs_gauge_invariant():
    grid = qwz_grid(24)
    family = qwz_family(1.0)
    base = plaquette_fluxes(family, grid)
    for seed in (1, 2):
        assert np.allclose(plaquette_fluxes(rephased(family, seed), grid), base, atol=1e-12)
        assert chern_number(rephased(family, seed), grid) == chern_number(family, grid)


def test_pointwise_quantities_gauge_invariant():
    grid = qwz_grid(12)
    family, shifted = qwz_family(1.5), rephased(qwz_family(1.5), 3)
    # smooth per-point phases are the relevant freedom for the finite-difference tensor
    twisted = QuantumFamily(2, lambda lam: np.exp(1j * (np.sin(lam[0]) + 2 * lam[1])) * family.state(lam))
    omega = berry_curvature_field(family, grid)
    assert np.allclose(berry_curvature_field(twisted, grid), omega, atol=1e-8)
    base = metric_field(family, grid)
    other = metric_field(twisted, grid)
    for name in "EFG":
        assert np.allclose(getattr(other, name), getattr(base, name), atol=1e-8)
    assert manifold_volume(metric_field(shifted, grid)) == pytest.approx(manifold_volume(base), rel=1e-8)


# --- volumes ------------------------------------------------------------------------


def test_bloch_volume_is_pi():
    vol = manifold_volume(metric_field(bloch_family(), sphere_grid()))
    assert vol == pytest.approx(np.pi, abs=1e-6)


def test_flat_torus_volume():
    vol = manifold_volume(metric_field(torus_family(), torus_grid()))
    assert vol == pytest.approx(0.25 * (2 * np.pi) ** 2, rel=1e-8)


@pytest.mark.parametrize("m", [-3.0, -1.5, -0.5, 0.5, 1.5, 3.0, 1.0])
def test_volume_bounds_chern_number_on_qwz_sweep(m):
    check = volume_chern_check(qwz_family(m), qwz_grid())
    assert check.holds
    assert check.volume >= np.pi * abs(check.chern) - 1e-6


def test_metric_field_validation_and_clipping():
    grid = torus_grid(8)
    ones = np.ones(grid.shape)
    with pytest.raises(ValueError):
        MetricField(grid, -ones, 0 * ones, ones)
    with pytest.raises(ValueError):
        MetricField(grid, ones[:4], 0 * ones, ones)
    with pytest.raises(IllConditionedManifoldError):
        manifold_volume(MetricField(grid, ones, 2 * ones, ones))
    field_ = MetricField(grid, ones, 0 * ones, ones)
    with pytest.raises(ValueError):
        field_.E[0, 0] = 2.0


# --- Gauss-Bonnet -------------------------------------------------------------------


def test_bloch_sphere_gauss_bonnet():
    rep = gauss_bonnet(metric_field(bloch_family(), sphere_grid()))
    assert rep.euler == pytest.approx(2.0, abs=0.02)
    assert np.max(np.abs(rep.K[rep.interior] - 4.0)) < 1e-4
    assert rep.volume == pytest.approx(np.pi, abs=1e-6)
    assert rep.boundary_integral == 0.0


def test_hemisphere_with_equator_boundary():
    grid = sphere_grid(65, 64, polar_max=np.pi / 2)
    rep = gauss_bonnet(metric_field(bloch_family(), grid), boundary=("closed", "open"))
    assert rep.euler == pytest.approx(1.0, abs=0.05)
    assert np.allclose(rep.geodesic_curvature["end"], 0.0, atol=1e-6)
    assert rep.curvature_integral == pytest.approx(2 * np.pi, rel=1e-4)


def test_flat_torus_gauss_bonnet():
    rep = gauss_bonnet(metric_field(torus_family(), torus_grid()))
    assert np.allclose(rep.K, 0.0, atol=1e-8)
    assert rep.euler == pytest.approx(0.0, abs=1e-10)


def test_cap_boundary_curvature_is_accounted_for():
    # polar cap of opening t0 on a sphere of radius 1/2: the Euler characteristic is still 1
    grid = sphere_grid(65, 64, polar_max=1.0)
    rep = gauss_bonnet(metric_field(bloch_family(), grid), boundary=("closed", "open"))
    assert rep.euler == pytest.approx(1.0, abs=0.05)
    assert rep.boundary_integral > 0


def test_invalid_boundary_kind():
    with pytest.raises(ValueError):
        gauss_bonnet(metric_field(bloch_family(), sphere_grid(33, 16)), boundary=("closed", "ragged"))


def test_refinement_convergence_on_smooth_manifolds():
    family = bloch_family()
    coarse, fine = sphere_grid(65, 32), sphere_grid(65, 32).refined()
    rc, rf = gauss_bonnet(metric_field(family, coarse)), gauss_bonnet(metric_field(family, fine))
    assert abs(rc.volume - rf.volume) < 5e-3 * rf.volume
    assert abs(rc.euler - rf.euler) < 5e-3 * abs(rf.euler)
    flat = [manifold_volume(metric_field(torus_family(), g)) for g in (torus_grid(16), torus_grid(32))]
    assert abs(flat[0] - flat[1]) < 5e-3 * flat[1]


def test_unresolved_curvature_fails_refinement_check():
    # a metric that is rough from row to row cannot be differentiated reliably
    grid = sphere_grid(33, 16)
    smooth = metric_field(bloch_family(), grid)
    rough = 1 + 0.3 * np.random.default_rng(0).random(grid.shape[0])[:, None]
    with pytest.raises(NonConvergenceError):
        gauss_bonnet(MetricField(grid, smooth.E * rough, smooth.F, smooth.G * rough))


# --- curvature from volume scaling ----------------------------------------------------


def test_single_spin_volume_ratio_is_flat():
    res = curvature_from_volume_scaling(0.0 * SIGMA_Z, 1, [0.05, 0.1, 0.15, 0.2], shape=(17, 16))
    assert res.power == 0
    assert res.flat_volume == pytest.approx(np.pi, abs=1e-3)
    assert abs(res.coefficient) < 2e-2
    assert np.allclose(res.volumes / res.flat_volume, 1.0, atol=1e-3)


@pytest.mark.slow
def test_heisenberg_coefficient_positive_and_window_stable():
    h0 = heisenberg_chain(4)
    wide = curvature_from_volume_scaling(h0, 4, [0.05, 0.1, 0.15, 0.2], shape=(17, 16))
    narrow = curvature_from_volume_scaling(h0, 4, [0.025, 0.05, 0.075, 0.1], shape=(17, 16))
    assert wide.coefficient > 0 and narrow.coefficient > 0
    assert abs(wide.coefficient - narrow.coefficient) < 0.1 * narrow.coefficient
    # the h -> 0 limit of the ratio is the flat reference
    assert narrow.volumes[0] / (narrow.flat_volume * narrow.fields[0] ** narrow.power) == pytest.approx(1.0, abs=1e-2)


def test_volume_scaling_validation():
    with pytest.raises(ValueError):
        curvature_from_volume_scaling(0.0 * SIGMA_Z, 1, [0.1, 0.2, 0.3])
    with pytest.raises(ValueError):
        curvature_from_volume_scaling(0.0 * SIGMA_Z, 1, [0.0, 0.1, 0.2, 0.3])
