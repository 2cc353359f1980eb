"""Geometry and topology of two-parameter families of pure states.

A :class:`Grid2D` samples a rectangle of parameters; periodic axes omit the
repeated endpoint, non-periodic axes include both ends. Fields computed on a
grid are ``(n1, n2)`` arrays indexed like the grid.

* Chern numbers use plaquette link phases, which are gauge invariant and
  integral at any resolution on a closed surface.
* Volumes integrate ``sqrt(det g)`` with Simpson weights on non-periodic axes
  and the rectangle rule on periodic ones.
* Gaussian curvature follows from the first fundamental form and
  Christoffel symbols obtained with fourth-order finite differences. Edge
  rows where the metric degenerates (poles of a sphere chart) are dropped
  from the stencils and contribute nothing to the integrals.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    BandDegeneracyError,
    DegenerateGroundStateError,
    IllConditionedManifoldError,
    NonConvergenceError,
)
from .quantum_core import as_hermitian, collective_spin, qwz_bloch, staggered_spin
from .state_geometry import QuantumFamily, qgt_pure

CLIP_FRACTION = 0.01
REFINEMENT_TOL = 0.1
DEGENERATE_REL = 1e-10


# --------------------------------------------------------------------------
# grids


def _simpson_weights(n: int, h: float) -> np.ndarray:
    """Composite Simpson weights; an even point count ends with a 3/8 panel."""
    w = np.zeros(n)
    m = n if n % 2 == 1 else n - 3
    if m >= 3:
        w[:m:2] += 2.0
        w[1:m:2] += 4.0
        w[0] -= 1.0
        w[m - 1] -= 1.0
        w[:m] *= h / 3.0
    if n % 2 == 0:
        w[n - 4 :] += 3.0 * h / 8.0 * np.array([1.0, 3.0, 3.0, 1.0])
    return w


@dataclass(frozen=True)
class Grid2D:
    """Rectangular parameter grid ``[a1, b1] x [a2, b2]`` with ``n1 x n2`` points."""

    ranges: tuple[tuple[float, float], tuple[float, float]]
    shape: tuple[int, int]
    periodic: tuple[bool, bool] = (True, True)

    def __post_init__(self) -> None:
        ranges = tuple((float(a), float(b)) for a, b in self.ranges)
        shape = tuple(int(n) for n in self.shape)
        periodic = tuple(bool(p) for p in self.periodic)
        if len(ranges) != 2 or len(shape) != 2 or len(periodic) != 2:
            raise ValueError("a 2-d grid needs two ranges, resolutions and periodicity flags")
        if any(n < 8 for n in shape):
            raise ValueError("each axis needs at least 8 points")
        if any(not b > a for a, b in ranges):
            raise ValueError("ranges must be non-empty intervals")
        object.__setattr__(self, "ranges", ranges)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "periodic", periodic)

    def axis(self, i: int) -> np.ndarray:
        a, b = self.ranges[i]
        n = self.shape[i]
        if self.periodic[i]:
            return a + (b - a) * np.arange(n) / n
        return np.linspace(a, b, n)

    def spacing(self, i: int) -> float:
        a, b = self.ranges[i]
        n = self.shape[i]
        return (b - a) / n if self.periodic[i] else (b - a) / (n - 1)

    def weights(self, i: int) -> np.ndarray:
        h = self.spacing(i)
        if self.periodic[i]:
            return np.full(self.shape[i], h)
        return _simpson_weights(self.shape[i], h)

    def points(self) -> np.ndarray:
        """``(n1, n2, 2)`` array of parameter pairs."""
        u, v = np.meshgrid(self.axis(0), self.axis(1), indexing="ij")
        return np.stack([u, v], axis=-1)

    def coarsened(self) -> Optional["Grid2D"]:
        """Grid with every other point, or ``None`` when that is not a sub-grid of at least 8 points."""
        shape = []
        for n, p in zip(self.shape, self.periodic):
            if p:
                if n % 2:
                    return None
                shape.append(n // 2)
            else:
                if n % 2 == 0:
                    return None
                shape.append((n + 1) // 2)
        if min(shape) < 8:
            return None
        return Grid2D(self.ranges, tuple(shape), self.periodic)

    def refined(self) -> "Grid2D":
        shape = tuple(2 * n if p else 2 * n - 1 for n, p in zip(self.shape, self.periodic))
        return Grid2D(self.ranges, shape, self.periodic)


def _map_grid(func: Callable[[np.ndarray], object], grid: Grid2D, threads: int = 1) -> list:
    pts = grid.points().reshape(-1, 2)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(func, pts, chunksize=max(1, len(pts) // (4 * threads))))
    return [func(p) for p in pts]


# --------------------------------------------------------------------------
# families


def band_family(hamiltonian: Callable[[np.ndarray], np.ndarray], band: int = 0, gap_tol: float = 1e-8) -> QuantumFamily:
    """Eigenvector family of the ``band``-th level of a parameter-dependent Hamiltonian.

    Raises :class:`~qig.errors.BandDegeneracyError` where the band comes
    within ``gap_tol`` of a neighbouring level.
    """

    def evaluate(lam: np.ndarray) -> np.ndarray:
        e, v = np.linalg.eigh(as_hermitian(hamiltonian(lam)))
        gaps = []
        if band > 0:
            gaps.append(e[band] - e[band - 1])
        if band < e.size - 1:
            gaps.append(e[band + 1] - e[band])
        if gaps and min(gaps) < gap_tol:
            raise BandDegeneracyError(f"band {band} is degenerate at {lam} (gap {min(gaps):.2e})")
        return v[:, band]

    return QuantumFamily(2, evaluate)


def qwz_family(m: float, band: int = 0) -> QuantumFamily:
    """Band eigenstates of the two-band model over the Brillouin zone ``(kx, ky)``."""
    return band_family(lambda k: qwz_bloch(k[0], k[1], m), band=band)


def qwz_grid(n: int = 64) -> Grid2D:
    return Grid2D(((0.0, 2 * np.pi), (0.0, 2 * np.pi)), (n, n), (True, True))


def bloch_family() -> QuantumFamily:
    """Spin-1/2 coherent states ``(cos(t/2), e^{i p} sin(t/2))`` over ``(t, p)``."""
    return QuantumFamily(2, lambda lam: np.array([np.cos(0.5 * lam[0]), np.exp(1j * lam[1]) * np.sin(0.5 * lam[0])]))


def sphere_grid(n_polar: int = 129, n_azimuth: int = 64, polar_max: float = np.pi) -> Grid2D:
    """Polar angle on ``[0, polar_max]`` (non-periodic) by azimuth on ``[0, 2 pi)``."""
    return Grid2D(((0.0, polar_max), (0.0, 2 * np.pi)), (n_polar, n_azimuth), (False, True))


# --------------------------------------------------------------------------
# Berry curvature and Chern numbers


def berry_curvature_field(family: QuantumFamily, grid: Grid2D, threads: int = 1) -> np.ndarray:
    """Berry curvature ``Omega_12 = 2 Im Q_12`` at every grid point."""
    vals = _map_grid(lambda p: qgt_pure(family, p).berry[0, 1], grid, threads)
    return np.asarray(vals, dtype=float).reshape(grid.shape)


def _states_on_grid(family: QuantumFamily, grid: Grid2D, threads: int = 1) -> np.ndarray:
    states = _map_grid(family.state, grid, threads)
    return np.asarray(states).reshape(*grid.shape, -1)


def _check_closed(grid: Grid2D, sphere_closure: bool) -> None:
    if not grid.periodic[1]:
        raise ValueError("the second axis must be periodic")
    if not grid.periodic[0] and not sphere_closure:
        raise ValueError("a non-periodic first axis requires sphere_closure=True")


def plaquette_fluxes(family: QuantumFamily, grid: Grid2D, sphere_closure: bool = False, threads: int = 1) -> np.ndarray:
    """Gauge-invariant Berry flux through every grid plaquette.

    Each flux is the phase of the product of overlaps around the plaquette
    ``(i, j) -> (i+1, j) -> (i+1, j+1) -> (i, j+1)``.
    """
    _check_closed(grid, sphere_closure)
    s = _states_on_grid(family, grid, threads)
    if grid.periodic[0]:
        s1 = np.roll(s, -1, axis=0)
    else:
        s, s1 = s[:-1], s[1:]
    s2 = np.roll(s, -1, axis=1)
    s12 = np.roll(s1, -1, axis=1)

    def link(a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return np.sum(a.conj() * b, axis=-1)

    loop = link(s, s1) * link(s1, s12) * link(s12, s2) * link(s2, s)
    return np.angle(loop)


def chern_number(family: QuantumFamily, grid: Grid2D, sphere_closure: bool = False, threads: int = 1) -> int:
    """Chern number from plaquette link phases.

    Both axes must be periodic, or the first axis must run between two poles
    (``sphere_closure=True``) where the state does not depend on the second
    parameter.
    """
    total = float(np.sum(plaquette_fluxes(family, grid, sphere_closure, threads))) / (2 * np.pi)
    c = int(np.rint(total))
    if abs(total - c) > 1e-6:
        raise NonConvergenceError(f"lattice flux {total:.8f} is not integral; the surface is not closed")
    return c


def chern_number_riemann(family: QuantumFamily, grid: Grid2D, threads: int = 1) -> float:
    """Quadrature of the Berry curvature field divided by ``2 pi`` (not rounded)."""
    omega = berry_curvature_field(family, grid, threads)
    return float(grid.weights(0) @ omega @ grid.weights(1)) / (2 * np.pi)


# --------------------------------------------------------------------------
# metric fields and volumes


@dataclass(frozen=True)
class MetricField:
    """First fundamental form ``E, F, G`` sampled on ``grid``."""

    grid: Grid2D
    E: np.ndarray
    F: np.ndarray
    G: np.ndarray

    def __post_init__(self) -> None:
        for name in ("E", "F", "G"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != self.grid.shape:
                raise ValueError(f"{name} has shape {arr.shape}, grid is {self.grid.shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        scale = max(1e-300, float(np.max(np.abs([self.E, self.G]))))
        if np.any(self.E < -1e-10 * scale) or np.any(self.G < -1e-10 * scale):
            raise ValueError("metric has negative diagonal components")

    @property
    def det(self) -> np.ndarray:
        return self.E * self.G - self.F**2

    def clipped(self) -> np.ndarray:
        """Mask of points whose determinant is negative beyond roundoff."""
        scale = max(1e-300, float(np.max(np.abs(self.det))))
        return self.det < -1e-10 * scale


def metric_field(family: QuantumFamily, grid: Grid2D, threads: int = 1) -> MetricField:
    """Metric ``Re Q`` of a two-parameter pure-state family on a grid."""
    vals = np.asarray(_map_grid(lambda p: qgt_pure(family, p).metric, grid, threads)).reshape(*grid.shape, 2, 2)
    return MetricField(grid, vals[..., 0, 0], 0.5 * (vals[..., 0, 1] + vals[..., 1, 0]), vals[..., 1, 1])


def manifold_volume(field_: MetricField) -> float:
    """Area ``int sqrt(det g)`` with negative determinants clipped to zero.

    More than 1% clipped points raises
    :class:`~qig.errors.IllConditionedManifoldError`.
    """
    clipped = field_.clipped()
    if clipped.mean() > CLIP_FRACTION:
        raise IllConditionedManifoldError(f"{clipped.mean():.1%} of grid points have a negative metric determinant")
    root = np.sqrt(np.clip(field_.det, 0.0, None))
    g = field_.grid
    return float(g.weights(0) @ root @ g.weights(1))


@dataclass(frozen=True)
class VolumeChernCheck:
    volume: float
    chern: int
    holds: bool


def volume_chern_check(family: QuantumFamily, grid: Grid2D, sphere_closure: bool = False, threads: int = 1) -> VolumeChernCheck:
    """Check the lower bound ``Vol >= pi |C|`` on a closed parameter surface."""
    vol = manifold_volume(metric_field(family, grid, threads))
    c = chern_number(family, grid, sphere_closure, threads)
    return VolumeChernCheck(volume=vol, chern=c, holds=vol >= np.pi * abs(c) - 1e-6)


# --------------------------------------------------------------------------
# Gauss-Bonnet


def _derivative(f: np.ndarray, axis: int, h: float, periodic: bool) -> np.ndarray:
    """Fourth-order first derivative along ``axis``; one-sided near non-periodic edges."""
    if periodic:
        return (
            np.roll(f, 2, axis) - 8.0 * np.roll(f, 1, axis) + 8.0 * np.roll(f, -1, axis) - np.roll(f, -2, axis)
        ) / (12.0 * h)
    g = np.moveaxis(f, axis, 0)
    n = g.shape[0]
    if n < 5:
        raise ValueError("need at least 5 points for fourth-order differences")
    out = np.empty_like(g)
    out[2:-2] = (g[:-4] - 8.0 * g[1:-3] + 8.0 * g[3:-1] - g[4:]) / 12.0
    out[0] = (-25.0 * g[0] + 48.0 * g[1] - 36.0 * g[2] + 16.0 * g[3] - 3.0 * g[4]) / 12.0
    out[1] = (-3.0 * g[0] - 10.0 * g[1] + 18.0 * g[2] - 6.0 * g[3] + g[4]) / 12.0
    out[-1] = (25.0 * g[-1] - 48.0 * g[-2] + 36.0 * g[-3] - 16.0 * g[-4] + 3.0 * g[-5]) / 12.0
    out[-2] = (3.0 * g[-1] + 10.0 * g[-2] - 18.0 * g[-3] + 6.0 * g[-4] - g[-5]) / 12.0
    return np.moveaxis(out / h, 0, axis)


@dataclass(frozen=True)
class CurvatureReport:
    """Gaussian curvature, boundary geodesic curvature and the derived invariants.

    ``K`` is ``nan`` on degenerate edge rows. ``geodesic_curvature`` maps
    ``"start"`` / ``"end"`` (the two ends of the first axis) to curvature
    samples along that boundary curve.
    """

    K: np.ndarray
    geodesic_curvature: dict
    euler: float
    volume: float
    curvature_integral: float
    boundary_integral: float
    chern: Optional[int] = None
    interior: np.ndarray = field(default=None, repr=False)


_BOUNDARY_KINDS = ("closed", "open")


def _valid_rows(det: np.ndarray, grid: Grid2D) -> slice:
    tol = DEGENERATE_REL * max(1e-300, float(det.max()))
    bad_rows = np.all(det <= tol, axis=1)
    bad_points = det <= tol
    lo, hi = 0, det.shape[0]
    if not grid.periodic[0]:
        while lo < hi and bad_rows[lo]:
            lo += 1
        while hi > lo and bad_rows[hi - 1]:
            hi -= 1
    if hi - lo < 5 or np.any(bad_points[lo:hi]):
        raise IllConditionedManifoldError("metric degenerates away from the edges of the chart")
    return slice(lo, hi)


def _gauss_bonnet_core(E: np.ndarray, F: np.ndarray, G: np.ndarray, grid: Grid2D, boundary: Sequence[str]):
    det = E * G - F**2
    rows = _valid_rows(det, grid)
    e, f, g, d = E[rows], F[rows], G[rows], det[rows]
    h1, h2 = grid.spacing(0), grid.spacing(1)
    p1, p2 = grid.periodic
    if not p2:
        raise ValueError("the second axis must be periodic")

    def du(x):
        return _derivative(x, 0, h1, p1)

    def dv(x):
        return _derivative(x, 1, h2, p2)

    # the metric itself is smooth up to degenerate edges, so differentiate it on the full grid
    eu, ev, fu, fv, gu, gv = (d_(x)[rows] for x in (E, F, G) for d_ in (du, dv))
    two_det = 2.0 * d
    gamma2_11 = (2.0 * e * fu - e * ev - f * eu) / two_det
    gamma2_12 = (e * gu - f * ev) / two_det
    gamma1_22 = (2.0 * g * fv - g * gu - f * gv) / two_det
    root = np.sqrt(d)
    k_root = dv(root * gamma2_11 / e) - du(root * gamma2_12 / e)

    full = np.zeros(grid.shape)
    full[rows] = k_root
    curvature = np.full(grid.shape, np.nan)
    curvature[rows] = k_root / root
    w1, w2 = grid.weights(0), grid.weights(1)
    k_integral = float(w1 @ full @ w2)

    kg: dict[str, np.ndarray] = {}
    b_integral = 0.0
    if not p1:
        for end, sign, idx in (("start", 1.0, 0), ("end", -1.0, -1)):
            kind = boundary[0 if end == "start" else 1]
            if kind not in _BOUNDARY_KINDS:
                raise ValueError(f"boundary kind must be one of {_BOUNDARY_KINDS}, got {kind!r}")
            if kind == "closed":
                continue
            if (idx == 0 and rows.start != 0) or (idx == -1 and rows.stop != grid.shape[0]):
                raise ValueError(f"the {end} edge is degenerate and cannot carry a boundary curve")
            line = root[idx] * gamma1_22[idx] / g[idx]
            kg[end] = sign * line / np.sqrt(g[idx])
            b_integral += sign * float(np.sum(line * w2))
    euler = (k_integral + b_integral) / (2 * np.pi)
    # points whose centred stencils never read a value built from one-sided differences
    interior = np.ones(grid.shape, dtype=bool)
    if not p1:
        interior[:] = False
        interior[rows.start + 3 : rows.stop - 3] = True
    return curvature, kg, euler, k_integral, b_integral, interior


def gauss_bonnet(field_: MetricField, boundary: Sequence[str] = ("closed", "closed"), check_refinement: bool = True) -> CurvatureReport:
    """Euler characteristic ``(int K dA + int k_g dl) / 2 pi`` of a metric field.

    Parameters
    ----------
    boundary:
        For a non-periodic first axis, the kind of its start and end edges:
        ``"closed"`` for an edge that collapses to a point (or is absent) and
        ``"open"`` for a boundary curve whose geodesic curvature is added.
    check_refinement:
        Recompute on the grid with every other point and raise
        :class:`~qig.errors.NonConvergenceError` if the Euler characteristic
        moves by more than 0.1.
    """
    grid = field_.grid
    curvature, kg, euler, k_int, b_int, interior = _gauss_bonnet_core(field_.E, field_.F, field_.G, grid, boundary)
    if check_refinement:
        coarse = grid.coarsened()
        if coarse is not None:
            sl = tuple(slice(None, None, 2) for _ in range(2))
            _, _, euler_c, _, _, _ = _gauss_bonnet_core(field_.E[sl], field_.F[sl], field_.G[sl], coarse, boundary)
            if abs(euler_c - euler) > REFINEMENT_TOL:
                raise NonConvergenceError(
                    f"Euler characteristic not converged: {euler_c:.4f} (coarse) vs {euler:.4f} (fine)"
                )
    return CurvatureReport(
        K=curvature,
        geodesic_curvature=kg,
        euler=euler,
        volume=manifold_volume(field_),
        curvature_integral=k_int,
        boundary_integral=b_int,
        interior=interior,
    )


# --------------------------------------------------------------------------
# curvature from volume scaling


def ground_state_family(hamiltonian: Callable[[np.ndarray], np.ndarray], n_params: int = 2) -> QuantumFamily:
    """Ground states of a parameter-dependent Hamiltonian; degeneracy is an error."""

    def evaluate(lam: np.ndarray) -> np.ndarray:
        e, v = np.linalg.eigh(as_hermitian(hamiltonian(lam)))
        if e[1] - e[0] <= 1e-10 * max(1.0, e[-1] - e[0]):
            raise DegenerateGroundStateError(f"degenerate ground state at {lam}")
        return v[:, 0]

    return QuantumFamily(n_params, evaluate)


def direction(polar: float, azimuth: float) -> np.ndarray:
    """Unit vector ``(cos az sin pol, sin az sin pol, cos pol)``."""
    return np.array([np.cos(azimuth) * np.sin(polar), np.sin(azimuth) * np.sin(polar), np.cos(polar)])


@dataclass(frozen=True)
class VolumeScalingResult:
    """Fit of ``Vol(h) = A h^p (1 - c h^2 + d h^4)`` over the sampled fields ``h``.

    ``power`` is the even integer ``p`` describing the small-field growth
    of the state manifold, ``flat_volume`` the prefactor ``A`` (the
    reference volume of a flat manifold of the same size) and
    ``coefficient`` the curvature coefficient ``c``. ``quartic`` is ``d``,
    which absorbs the next order so that ``c`` is stable across windows.
    """

    fields: np.ndarray
    volumes: np.ndarray
    power: int
    flat_volume: float
    coefficient: float
    quartic: float
    residual: float


def curvature_from_volume_scaling(
    h0,
    n_sites: int,
    fields: Sequence[float],
    shape: tuple[int, int] = (33, 32),
    staggered: bool = True,
    threads: int = 1,
) -> VolumeScalingResult:
    """Estimate manifold curvature from how the volume of a sphere of ground states shrinks.

    For each field ``h`` the ground states of ``H0 + h Lambda(n)`` with
    ``Lambda(n)`` the staggered (or collective) spin along the unit vector
    ``n`` trace a two-sphere; its metric volume ``Vol(h)`` is computed on a
    ``(polar, azimuth)`` grid. The volumes are fitted to
    ``A h^p (1 - c h^2 + d h^4)``; a relative fit residual above 10% raises
    :class:`~qig.errors.NonConvergenceError`.
    """
    h_vals = np.asarray(sorted(float(h) for h in fields))
    if h_vals.size < 4 or np.any(h_vals <= 0):
        raise ValueError("need at least four positive field values")
    h0m = as_hermitian(h0)
    build = staggered_spin if staggered else collective_spin
    comps = [build(ax, n_sites) for ax in "xyz"]
    grid = sphere_grid(*shape)
    vols = []
    for h in h_vals:

        def ham(lam: np.ndarray, h: float = h) -> np.ndarray:
            n = direction(lam[0], lam[1])
            return h0m + h * (n[0] * comps[0] + n[1] * comps[1] + n[2] * comps[2])

        vols.append(manifold_volume(metric_field(ground_state_family(ham), grid, threads)))
    vols = np.asarray(vols)
    slope = np.log(vols[1] / vols[0]) / np.log(h_vals[1] / h_vals[0])
    power = int(2 * np.rint(slope / 2.0))
    scaled = vols / h_vals**power
    quartic, b, a = np.polyfit(h_vals**2, scaled, 2)
    fitted = np.polyval([quartic, b, a], h_vals**2)
    residual = float(np.max(np.abs(fitted - scaled)) / abs(a))
    if residual > 0.1:
        raise NonConvergenceError(f"volume fit residual {residual:.1%} exceeds 10%")
    return VolumeScalingResult(
        fields=h_vals, volumes=vols, power=power, flat_volume=float(a), coefficient=float(-b / a),
        quartic=float(quartic / a),
        residual=residual,
    )
