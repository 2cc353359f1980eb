"""Thermal and quantum parts of fluctuations, and their link to linear response.

For a Gibbs state of ``H`` the symmetrized covariance of two observables
splits into a classical part, the static susceptibility
``(1/beta^2) d^2 ln Z / dlam_mu dlam_nu`` of ``H + lam_mu A + lam_nu B``,
and the remaining quantum part. The quantum variance can also be reached
from the Wigner-Yanase-Dyson skew information or from the dissipative
response function, which is represented here as a finite set of Lehmann
lines.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._numerics import hermitian_part, psd_eigh, richardson_hessian
from .errors import BoundaryDivergenceError, NonConvergenceError
from .quantum_core import as_density_matrix, as_hermitian, covariance_real, gibbs_state, variance
from .state_geometry import MonotoneFunction, qfim_spectral

FREQ_MERGE_TOL = 1e-10
FD_SCALE = 1e-3
FD_CONSISTENCY = 1e-6
EIGEN_CUTOFF = 1e-14


@dataclass(frozen=True)
class SpectralFunction:
    """Discrete dissipative response: lines at positive frequencies with weights.

    ``autocorrelation`` marks spectra of a single operator, whose weights are
    non-negative for Gibbs states.
    """

    frequencies: np.ndarray
    weights: np.ndarray
    beta: float
    autocorrelation: bool = True

    def __post_init__(self) -> None:
        w = np.array(self.frequencies, dtype=float).ravel()
        a = np.array(self.weights, dtype=float).ravel()
        if w.shape != a.shape:
            raise ValueError("frequencies and weights must have equal length")
        if np.any(w <= 0.0) or np.any(np.diff(w) <= 0.0):
            raise ValueError("frequencies must be positive and strictly increasing")
        if self.autocorrelation and np.any(a < -1e-12 * max(1.0, np.abs(a).max(initial=0.0))):
            raise ValueError("autocorrelation weights must be non-negative")
        w.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "frequencies", w)
        object.__setattr__(self, "weights", a)

    def __len__(self) -> int:
        return self.frequencies.size


@dataclass(frozen=True)
class FluctuationReport:
    """Total, thermal and quantum variance of one generator, with its SLD QFI."""

    total: float
    classical: float
    quantum: float
    qfi: float


def _eigen(h) -> tuple[np.ndarray, np.ndarray]:
    return np.linalg.eigh(as_hermitian(h))


def _gibbs_weights(e: np.ndarray, beta: float) -> np.ndarray:
    w = np.exp(-beta * (e - e[0]))
    return w / w.sum()


def _kubo_kernel(e: np.ndarray, p: np.ndarray, beta: float) -> np.ndarray:
    """Duhamel weights ``(p_j - p_k) / (beta (E_k - E_j))``, equal to ``p_j`` on the diagonal."""
    de = e[None, :] - e[:, None]
    same = np.abs(de) <= 1e-12 * max(1.0, np.abs(e).max())
    safe = np.where(same, 1.0, beta * de)
    k = (p[:, None] - p[None, :]) / safe
    return np.where(same, 0.5 * (p[:, None] + p[None, :]), k)


def classical_covariance(
    h, a, b, beta: float, method: str = "spectral", step: Optional[float] = None
) -> float:
    """Thermal covariance ``(1/beta^2) d^2 ln Z / dlam_a dlam_b`` at zero source fields.

    Parameters
    ----------
    method:
        ``"spectral"`` evaluates the second derivative exactly in the
        eigenbasis of ``H`` (Duhamel/Kubo-Mori inner product).
        ``"finite_difference"`` differentiates ``ln Z`` numerically with a
        Richardson check between ``step`` and ``step/2``.
    step:
        Source-field step for finite differences, as a fraction of
        ``1 / (beta ||A||)``; default 1e-3.
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    hm, am, bm = as_hermitian(h), as_hermitian(a), as_hermitian(b)
    if method == "spectral":
        e, v = np.linalg.eigh(hm)
        p = _gibbs_weights(e, beta)
        ae, be = v.conj().T @ am @ v, v.conj().T @ bm @ v
        kernel = _kubo_kernel(e, p, beta)
        second = float(np.sum(kernel * (ae * be.T).real))
        mean_a = float(np.sum(p * np.diag(ae).real))
        mean_b = float(np.sum(p * np.diag(be).real))
        return second - mean_a * mean_b
    if method != "finite_difference":
        raise ValueError(f"unknown method {method!r}")
    scale = FD_SCALE if step is None else float(step)
    norms = [max(np.linalg.norm(m, 2), 1e-300) for m in (am, bm)]
    h_steps = np.array([scale / (beta * n) for n in norms])

    def log_z(lam: np.ndarray) -> float:
        e = np.linalg.eigvalsh(hm + lam[0] * am + lam[1] * bm)
        return float(-beta * e[0] + np.log(np.sum(np.exp(-beta * (e - e[0])))))

    hess, spread = richardson_hessian(log_z, np.zeros(2), h_steps)
    reference = max(1.0, float(np.abs(hess).max()))
    if spread > FD_CONSISTENCY * reference:
        raise NonConvergenceError(f"free-energy Hessian unstable under step halving (spread {spread:.2e})")
    return float(hess[0, 1]) / beta**2


def quantum_covariance(h, a, b, beta: float, **kwargs) -> float:
    """Total symmetrized covariance minus :func:`classical_covariance`."""
    rho = gibbs_state(h, beta)
    return covariance_real(rho, a, b) - classical_covariance(h, a, b, beta, **kwargs)


def fluctuation_report(h, generator, beta: float, **kwargs) -> FluctuationReport:
    """Bundle total, thermal and quantum variance with the SLD QFI of a Gibbs state."""
    rho = gibbs_state(h, beta)
    total = variance(rho, generator)
    classical = classical_covariance(h, generator, generator, beta, **kwargs)
    return FluctuationReport(
        total=total,
        classical=classical,
        quantum=total - classical,
        qfi=float(qfim_spectral(rho, [generator])[0, 0]),
    )


def _matrix_power(p: np.ndarray, v: np.ndarray, power: float) -> np.ndarray:
    return (v * np.power(p, power)) @ v.conj().T


def wyd_skew(rho, a, b, alpha: float) -> float:
    """Wigner-Yanase-Dyson skew information ``-(1/2) Tr([A, rho^a][B, rho^(1-a)])``."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    r = as_density_matrix(rho)
    am, bm = as_hermitian(a), as_hermitian(b)
    p, v = psd_eigh(r)
    # roundoff-level eigenvalues would survive fractional powers (1e-17 ** 0.2 ~ 4e-4)
    p = np.where(p > EIGEN_CUTOFF * p.max(), p, 0.0)
    ra, rb = _matrix_power(p, v, alpha), _matrix_power(p, v, 1.0 - alpha)
    ca = am @ ra - ra @ am
    cb = bm @ rb - rb @ bm
    return float(-0.5 * np.trace(ca @ cb).real)


def _gauss_legendre_qv(rho, a, b, order: int) -> float:
    nodes, weights = np.polynomial.legendre.leggauss(order)
    alphas = np.clip(0.5 * (nodes + 1.0), 1e-6, 1.0 - 1e-6)
    return float(0.5 * np.sum(weights * np.array([wyd_skew(rho, a, b, x) for x in alphas])))


def qv_via_wyd_integral(rho, a, b=None, order: int = 32) -> float:
    """Quantum covariance as the integral of the skew information over ``alpha``.

    Gauss-Legendre quadrature of ``order`` nodes is compared with twice the
    order; a difference above 1e-8 raises
    :class:`~qig.errors.NonConvergenceError`.
    """
    if order < 8:
        raise ValueError("quadrature order must be at least 8")
    b = a if b is None else b
    coarse = _gauss_legendre_qv(rho, a, b, order)
    fine = _gauss_legendre_qv(rho, a, b, 2 * order)
    if abs(fine - coarse) > 1e-8:
        raise NonConvergenceError(f"skew-information quadrature not converged ({abs(fine - coarse):.2e})")
    return fine


def spectral_function(h, a, b, beta: float) -> SpectralFunction:
    """Lehmann representation of the dissipative response of ``A`` to ``B``.

    A pair of levels ``E_n < E_m`` contributes a line at ``E_m - E_n`` with
    weight ``pi (p_n - p_m) Re(A_nm B_mn)``. Lines closer than 1e-10 merge.
    """
    hm, am, bm = as_hermitian(h), as_hermitian(a), as_hermitian(b)
    e, v = np.linalg.eigh(hm)
    if beta < 0:
        raise ValueError("beta must be non-negative")
    if np.isinf(beta):
        p = (e - e[0] <= 1e-10 * max(1.0, np.abs(e).max())).astype(float)
        p /= p.sum()
    else:
        p = _gibbs_weights(e, beta)
    ae, be = v.conj().T @ am @ v, v.conj().T @ bm @ v
    span = max(1.0, float(e[-1] - e[0]))
    omega = e[None, :] - e[:, None]  # omega[n, m] = E_m - E_n
    mask = omega > FREQ_MERGE_TOL * span
    n_idx, m_idx = np.nonzero(mask)
    freqs = omega[n_idx, m_idx]
    amps = np.pi * (p[n_idx] - p[m_idx]) * (ae[n_idx, m_idx] * be[m_idx, n_idx]).real
    order = np.argsort(freqs, kind="stable")
    freqs, amps = freqs[order], amps[order]
    merged_f: list[float] = []
    merged_w: list[float] = []
    for f, w in zip(freqs, amps):
        if merged_f and f - merged_f[-1] <= FREQ_MERGE_TOL:
            merged_w[-1] += w
        else:
            merged_f.append(f)
            merged_w.append(w)
    mf, mw = np.array(merged_f), np.array(merged_w)
    scale = max(1.0, float(np.abs(am).max()) * float(np.abs(bm).max()))
    keep = np.abs(mw) > 1e-14 * scale
    return SpectralFunction(mf[keep], mw[keep], beta, autocorrelation=bool(np.allclose(am, bm)))


def _check_temperature(spec: SpectralFunction, temperature: Optional[float]) -> None:
    if temperature is None:
        return
    beta = np.inf if temperature == 0 else 1.0 / temperature
    if not np.isclose(beta, spec.beta, rtol=1e-12, atol=0.0) and beta != spec.beta:
        raise ValueError(f"temperature {temperature} inconsistent with spectrum beta {spec.beta}")


def langevin(x) -> np.ndarray:
    """Langevin function ``coth x - 1/x`` with ``L(0) = 0``."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-3
    safe = np.where(small, 1.0, x)
    big = 1.0 / np.tanh(safe) - 1.0 / safe
    return np.where(small, x / 3.0 - x**3 / 45.0, big)


def qfi_from_response(spec: SpectralFunction, temperature: Optional[float] = None) -> float:
    """``(4/pi) sum tanh(omega / 2T) w`` over the lines of ``spec``."""
    _check_temperature(spec, temperature)
    if len(spec) == 0:
        return 0.0
    return float(4.0 / np.pi * np.sum(np.tanh(0.5 * spec.beta * spec.frequencies) * spec.weights))


def qfi_from_response_general(spec: SpectralFunction, beta: float, func: MonotoneFunction) -> float:
    """Monotone-metric QFI ``(2/pi) sum (1 - e^{-beta w}) / f(e^{-beta w}) w_line``.

    Scaled by the normalization of ``func`` so that the SLD choice coincides
    with :func:`qfi_from_response`.
    """
    _check_temperature(spec, None if beta is None else (0.0 if np.isinf(beta) else 1.0 / beta))
    if len(spec) == 0:
        return 0.0
    y = np.exp(-spec.beta * spec.frequencies)
    fy = np.array([func.f_at_zero if yy == 0.0 else float(func(yy)) for yy in y])
    if np.any(fy <= 0.0):
        raise BoundaryDivergenceError(f"monotone function {func.name} vanishes at a needed argument")
    return float(func.normalization * 2.0 / np.pi * np.sum((1.0 - y) / fy * spec.weights))


def qv_from_response(spec: SpectralFunction, beta: Optional[float] = None) -> float:
    """Quantum variance ``(1/pi) sum L(beta w / 2) w_line`` with the Langevin function ``L``."""
    if beta is not None:
        _check_temperature(spec, 0.0 if np.isinf(beta) else 1.0 / beta)
    if len(spec) == 0:
        return 0.0
    if np.isinf(spec.beta):
        kernel = np.ones_like(spec.frequencies)
    else:
        kernel = langevin(0.5 * spec.beta * spec.frequencies)
    return float(np.sum(kernel * spec.weights) / np.pi)


def random_instance(rng: np.random.Generator, n_qubits: int) -> tuple[np.ndarray, np.ndarray, float]:
    """Random ``(H, Lambda, beta)`` with unit-scale Hermitian matrices and beta in [0.2, 3]."""
    dim = 2**n_qubits

    def herm() -> np.ndarray:
        g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        return hermitian_part(g) / np.sqrt(2.0 * dim)

    return herm(), herm(), float(rng.uniform(0.2, 3.0))
