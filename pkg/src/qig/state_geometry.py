"""Quantum geometric tensor, quantum Fisher metrics and state distances.

Conventions
-----------
* Unitary parametrizations follow ``d|psi>/dlam = -i Lambda |psi>``, so the
  density-matrix tangent is ``d rho = i [rho, Lambda]``.
* :class:`GeometricTensor` stores ``Q = <d psi|(1 - P)|d psi>``; its ``metric``
  is ``Re Q`` (the Fubini-Study metric) and its ``berry`` curvature is
  ``2 Im Q``, which makes the curvature integral over a closed surface equal
  to ``2 pi`` times the Chern number.
* Quantum Fisher matrices are normalized so that a pure state gives
  ``4 Var(Lambda)``; the Bures metric is one quarter of the SLD matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from ._numerics import default_step, hermitian_part, psd_eigh
from .errors import BoundaryDivergenceError, NonDifferentiableError, UnphysicalTangentError
from .quantum_core import as_density_matrix, as_hermitian, as_pure_state, covariance

SUPPORT_CUTOFF = 1e-12
TANGENT_ATOL = 1e-8

Generators = Union[Sequence[np.ndarray], Callable[[np.ndarray], Sequence[np.ndarray]]]


@dataclass(frozen=True)
class QuantumFamily:
    """A map from ``n_params`` real parameters to quantum states.

    ``evaluate`` returns a state vector (pure families) or a density matrix
    (``mixed=True``). ``generators`` optionally declares a unitary
    parametrization: a fixed list of Hermitian matrices, or a callable giving
    the list at a parameter point.
    """

    n_params: int
    evaluate: Callable[[np.ndarray], np.ndarray]
    generators: Optional[Generators] = None
    mixed: bool = False

    def __post_init__(self) -> None:
        if self.n_params < 1:
            raise ValueError("a family needs at least one parameter")
        if self.generators is not None and not callable(self.generators):
            if len(self.generators) != self.n_params:
                raise ValueError("need exactly one generator per parameter")

    def params(self, lam) -> np.ndarray:
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        if lam.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got shape {lam.shape}")
        return lam

    def state(self, lam) -> np.ndarray:
        lam = self.params(lam)
        s = self.evaluate(lam)
        return as_density_matrix(s) if self.mixed else as_pure_state(s)

    def generators_at(self, lam) -> list[np.ndarray]:
        if self.generators is None:
            raise ValueError("family declares no generators")
        gens = self.generators(self.params(lam)) if callable(self.generators) else self.generators
        if len(gens) != self.n_params:
            raise ValueError("need exactly one generator per parameter")
        return [as_hermitian(g) for g in gens]


@dataclass(frozen=True)
class GeometricTensor:
    """Hermitian ``d x d`` tensor over parameter indices."""

    tensor: np.ndarray

    def __post_init__(self) -> None:
        t = np.atleast_2d(np.asarray(self.tensor, dtype=complex))
        if t.shape[0] != t.shape[1]:
            raise ValueError("geometric tensor must be square")
        scale = max(1.0, float(np.abs(t).max(initial=0.0)))
        if np.abs(t - t.conj().T).max(initial=0.0) > 1e-10 * scale:
            raise ValueError("geometric tensor is not Hermitian")
        t = hermitian_part(t)
        t.setflags(write=False)
        object.__setattr__(self, "tensor", t)

    @property
    def metric(self) -> np.ndarray:
        """Real symmetric part ``Re Q``."""
        return self.tensor.real.copy()

    @property
    def berry(self) -> np.ndarray:
        """Antisymmetric Berry curvature ``2 Im Q``."""
        return 2.0 * self.tensor.imag

    @property
    def dim(self) -> int:
        return self.tensor.shape[0]


# --------------------------------------------------------------------------
# pure states


def _phase_aligned(psi0: np.ndarray, psi: np.ndarray) -> np.ndarray:
    ov = np.vdot(psi0, psi)
    if abs(ov) < 0.5:
        raise NonDifferentiableError("neighbouring states are nearly orthogonal; the family jumps")
    return psi * (abs(ov) / ov)


def _central_derivatives(family: QuantumFamily, lam: np.ndarray, h: np.ndarray) -> np.ndarray:
    psi0 = family.state(lam)
    cols = []
    for mu in range(family.n_params):
        e = np.zeros_like(lam)
        e[mu] = h[mu]
        plus = _phase_aligned(psi0, family.state(lam + e))
        minus = _phase_aligned(psi0, family.state(lam - e))
        cols.append((plus - minus) / (2.0 * h[mu]))
    return np.stack(cols, axis=1)


def _has_kink(family: QuantumFamily, lam: np.ndarray, h: np.ndarray, psi0: np.ndarray) -> bool:
    """True when forward and backward differences disagree at order one (a corner in the family)."""
    for mu in range(family.n_params):
        e = np.zeros_like(lam)
        e[mu] = h[mu]
        fwd = (_phase_aligned(psi0, family.state(lam + e)) - psi0) / h[mu]
        bwd = (psi0 - _phase_aligned(psi0, family.state(lam - e))) / h[mu]
        if np.linalg.norm(fwd - bwd) > 0.1 * max(1.0, np.linalg.norm(fwd + bwd) / 2):
            return True
    return False


def _qgt_from_derivatives(psi: np.ndarray, d: np.ndarray) -> np.ndarray:
    overlap = psi.conj() @ d  # <psi|d_mu psi>
    return d.conj().T @ d - np.outer(overlap.conj(), overlap)


def qgt_pure(family: QuantumFamily, lam, mode: Optional[str] = None, step: Optional[float] = None) -> GeometricTensor:
    """Quantum geometric tensor ``<d_mu psi|(1 - |psi><psi|)|d_nu psi>``.

    Parameters
    ----------
    mode:
        ``"generators"`` uses the declared generators,
        ``Q = <L_mu L_nu> - <L_mu><L_nu>``; ``"central"`` differentiates the
        states numerically after fixing the relative phase of neighbours.
        The default picks generators when the family has them.
    step:
        Finite-difference step, default ``1e-5 * max(1, |lam|)``. The
        derivative is also taken at twice the step; disagreement signals a
        non-differentiable point.
    """
    if family.mixed:
        raise ValueError("qgt_pure needs a pure-state family")
    lam = family.params(lam)
    if mode is None:
        mode = "generators" if family.generators is not None else "central"
    psi = family.state(lam)
    if mode == "generators":
        gens = family.generators_at(lam)
        q = np.array([[covariance(psi, a, b) for b in gens] for a in gens])
        return GeometricTensor(q)
    if mode != "central":
        raise ValueError(f"unknown mode {mode!r}")
    h = default_step(lam) if step is None else np.full(lam.shape, float(step))
    d = _central_derivatives(family, lam, h)
    d2 = _central_derivatives(family, lam, 2.0 * h)
    scale = max(1.0, float(np.abs(d).max()))
    if np.abs(d - d2).max() > 1e-4 * scale or _has_kink(family, lam, h, psi):
        raise NonDifferentiableError(f"finite-difference derivatives do not converge at {lam}")
    return GeometricTensor(_qgt_from_derivatives(psi, d))


def qfim_unitary_pure(psi, generators: Sequence[np.ndarray]) -> np.ndarray:
    """``F_mu,nu = 4 Re Cov(L_mu, L_nu)`` for a pure state."""
    psi = as_pure_state(psi)
    gens = [as_hermitian(g) for g in generators]
    f = 4.0 * np.array([[covariance(psi, a, b).real for b in gens] for a in gens])
    return 0.5 * (f + f.T)


def qfi(state, generator) -> float:
    """Quantum Fisher information of ``state`` along ``generator``.

    Pure vectors use ``4 Var``; density matrices use the spectral formula.
    """
    s = np.asarray(state)
    if s.ndim == 1:
        return float(qfim_unitary_pure(s, [generator])[0, 0])
    return float(qfim_spectral(s, [generator])[0, 0])


# --------------------------------------------------------------------------
# mixed states


def unitary_tangent(rho, generator) -> np.ndarray:
    """Tangent ``i [rho, Lambda]`` of the unitary path generated by ``Lambda``."""
    r = as_density_matrix(rho)
    g = as_hermitian(generator)
    return hermitian_part(1j * (r @ g - g @ r))


def _spectral_split(rho: np.ndarray, rel_cutoff: float):
    p, v = psd_eigh(rho)
    p = np.clip(p, 0.0, None)
    psum = p[:, None] + p[None, :]
    reach = psum > rel_cutoff * p.max()
    return p, v, psum, reach


def _tangent_in_eigenbasis(tangent, v: np.ndarray, reach: np.ndarray) -> np.ndarray:
    t = np.asarray(tangent, dtype=complex)
    if np.abs(t - t.conj().T).max(initial=0.0) > TANGENT_ATOL:
        raise ValueError("tangent is not Hermitian")
    if abs(np.trace(t)) > 1e-10 * max(1.0, np.abs(t).max()):
        raise ValueError("tangent is not traceless")
    te = v.conj().T @ hermitian_part(t) @ v
    if np.abs(te[~reach]).max(initial=0.0) > TANGENT_ATOL:
        raise UnphysicalTangentError("tangent moves weight between states outside the support")
    return te


def sld(rho, tangent, rel_cutoff: float = SUPPORT_CUTOFF) -> np.ndarray:
    """Symmetric logarithmic derivative ``L`` solving ``(rho L + L rho)/2 = d rho``.

    Matrix elements in the eigenbasis of ``rho`` are kept where
    ``p_j + p_k > rel_cutoff * max(p)`` and set to zero elsewhere.
    """
    r = as_density_matrix(rho)
    p, v, psum, reach = _spectral_split(r, rel_cutoff)
    te = _tangent_in_eigenbasis(tangent, v, reach)
    le = np.zeros_like(te)
    le[reach] = 2.0 * te[reach] / psum[reach]
    return hermitian_part(v @ le @ v.conj().T)


@dataclass(frozen=True)
class QFIMResult:
    """SLD quantum Fisher matrix with its spectral decomposition.

    Attributes
    ----------
    tensor:
        Complex ``Tr(rho L_mu L_nu)``; equals ``4 Q`` for pure states.
    qfim:
        Real part of ``tensor``, the SLD quantum Fisher matrix.
    non_unitary:
        Contribution from eigenvalue changes, ``sum_j dp_j dp_j / p_j``.
    unitary:
        Contribution from eigenvector rotations (off-diagonal elements).
    """

    tensor: np.ndarray
    qfim: np.ndarray
    unitary: np.ndarray
    non_unitary: np.ndarray

    @property
    def bures_metric(self) -> np.ndarray:
        return 0.25 * self.qfim

    @property
    def geometric_tensor(self) -> GeometricTensor:
        return GeometricTensor(0.25 * self.tensor)


def qfim_mixed(rho, tangents: Sequence[np.ndarray], rel_cutoff: float = SUPPORT_CUTOFF) -> QFIMResult:
    """SLD quantum Fisher matrix ``Re Tr(rho L_mu L_nu)`` and its split.

    The diagonal (eigenvalue) part reduces to the classical Fisher matrix of
    the spectrum, times four to match the ``4 Var`` normalization; the
    off-diagonal part is the purely quantum term.
    """
    r = as_density_matrix(rho)
    p, v, psum, reach = _spectral_split(r, rel_cutoff)
    tes = [_tangent_in_eigenbasis(t, v, reach) for t in tangents]
    d = len(tes)
    weight = np.zeros_like(psum)
    weight[reach] = 1.0 / psum[reach]
    # Tr(rho L_mu L_nu) = sum_jk p_j L_jk L_kj with L_jk = 2 T_jk / (p_j + p_k)
    sld_e = [2.0 * t * weight for t in tes]
    diag = np.eye(p.size, dtype=bool)
    tensor = np.empty((d, d), dtype=complex)
    unitary = np.empty((d, d))
    non_unitary = np.empty((d, d))
    for a in range(d):
        for b in range(d):
            tensor[a, b] = np.sum(p[:, None] * sld_e[a] * sld_e[b].T)
            prod = (tes[a] * tes[b].conj()).real * 2.0 * weight
            non_unitary[a, b] = np.sum(prod[diag])
            unitary[a, b] = np.sum(prod[~diag])
    return QFIMResult(
        tensor=hermitian_part(tensor),
        qfim=0.5 * (tensor.real + tensor.real.T),
        unitary=0.5 * (unitary + unitary.T),
        non_unitary=0.5 * (non_unitary + non_unitary.T),
    )


def qfim_spectral(rho, generators: Sequence[np.ndarray], rel_cutoff: float = SUPPORT_CUTOFF) -> np.ndarray:
    """Unitary QFI matrix ``2 sum (p_j - p_k)^2 / (p_j + p_k) Re(L_mu,jk conj(L_nu,jk))``.

    Evaluated directly from the spectrum of ``rho`` and the generator matrix
    elements, without forming tangents or SLDs.
    """
    r = as_density_matrix(rho)
    p, v, psum, reach = _spectral_split(r, rel_cutoff)
    coef = np.zeros_like(psum)
    coef[reach] = 2.0 * (p[:, None] - p[None, :])[reach] ** 2 / psum[reach]
    ge = [v.conj().T @ as_hermitian(g) @ v for g in generators]
    f = np.array([[np.sum(coef * (a * b.conj()).real) for b in ge] for a in ge])
    return 0.5 * (f + f.T)


# --------------------------------------------------------------------------
# monotone metrics


def _expm1_ratio(u: np.ndarray, a: float) -> np.ndarray:
    """``(x^a - 1) / (x - 1)`` in terms of ``u = ln x``, stable near ``u = 0``."""
    u = np.asarray(u, dtype=float)
    small = np.abs(u) < 1e-8
    safe = np.where(small, 1.0, u)
    out = np.expm1(a * safe) / np.expm1(safe)
    return np.where(small, a, out)


@dataclass(frozen=True)
class MonotoneFunction:
    """An operator-monotone function ``f`` with ``f(1) = 1`` selecting a quantum metric.

    Use the named constructors :meth:`sld`, :meth:`bkm`, :meth:`rld`,
    :meth:`lld`, :meth:`wyd` or :meth:`custom`.

    Attributes
    ----------
    f_at_zero:
        ``lim_{x->0} f(x)``.
    slope_at_infinity:
        ``lim_{x->inf} f(x) / x``.
    """

    name: str
    func: Callable[[np.ndarray], np.ndarray]
    f_at_zero: float
    slope_at_infinity: float
    alpha: Optional[float] = None

    def __call__(self, x) -> np.ndarray:
        return self.func(np.asarray(x, dtype=float))

    @property
    def normalization(self) -> float:
        """Factor making pure states give ``4 Var``: ``2 f(0)`` if ``f(0) > 0``, else 1."""
        return 2.0 * self.f_at_zero if self.f_at_zero > 0 else 1.0

    @classmethod
    def sld(cls) -> "MonotoneFunction":
        return cls("SLD", lambda x: 0.5 * (1.0 + x), 0.5, 0.5)

    @classmethod
    def bkm(cls) -> "MonotoneFunction":
        def f(x):
            u = np.log(x)
            small = np.abs(u) < 1e-8
            safe = np.where(small, 1.0, u)
            return np.where(small, 1.0 + 0.5 * u, np.expm1(safe) / safe)

        return cls("BKM", f, 0.0, 0.0)

    @classmethod
    def rld(cls) -> "MonotoneFunction":
        return cls("RLD", lambda x: np.asarray(x, dtype=float) * 1.0, 0.0, 1.0)

    @classmethod
    def lld(cls) -> "MonotoneFunction":
        return cls("LLD", lambda x: np.ones_like(np.asarray(x, dtype=float)), 1.0, 0.0)

    @classmethod
    def wyd(cls, alpha: float) -> "MonotoneFunction":
        if not 0.0 < alpha < 1.0:
            raise ValueError("WYD parameter must lie in (0, 1)")

        def f(x):
            u = np.log(x)
            return alpha * (1 - alpha) / (_expm1_ratio(u, alpha) * _expm1_ratio(u, 1.0 - alpha))

        limit = alpha * (1.0 - alpha)
        return cls(f"WYD({alpha:g})", f, limit, limit, alpha)

    @classmethod
    def custom(cls, func: Callable[[np.ndarray], np.ndarray], name: str = "custom") -> "MonotoneFunction":
        """Wrap a user function, rescaled so that ``f(1) = 1``."""
        at_one = float(func(np.array(1.0)))
        if not at_one > 0:
            raise ValueError("f(1) must be positive")

        def f(x):
            return np.asarray(func(np.asarray(x, dtype=float)), dtype=float) / at_one

        f0 = float(f(np.array(1e-300)))
        slope = float(f(np.array(1e300))) / 1e300
        return cls(name, f, f0, slope)


def _monotone_coefficient(spec: MonotoneFunction, x: float, y: float, cut: float) -> float:
    """``1 / (y f(x/y))`` including the limits where one argument vanishes."""
    if x <= cut and y <= cut:
        return 0.0
    if y <= cut:
        denom = x * spec.slope_at_infinity
    elif x <= cut:
        denom = y * spec.f_at_zero
    elif abs(x - y) <= 1e-14 * max(x, y):
        denom = x
    else:
        denom = y * float(spec(x / y))
    if denom <= 0.0:
        return np.inf
    return 1.0 / denom


def qfim_monotone(rho, tangents: Sequence[np.ndarray], spec: MonotoneFunction, rel_cutoff: float = SUPPORT_CUTOFF) -> np.ndarray:
    """Quantum Fisher matrix of the monotone metric selected by ``spec``.

    ``F = n_f sum_jk c_f(p_j, p_k) Re(T_mu,jk conj(T_nu,jk))`` with
    ``c_f(x, y) = 1 / (y f(x/y))`` and ``n_f`` the normalization of ``spec``.
    Only the real part is returned for metrics whose complex form has an
    antisymmetric imaginary part.
    """
    r = as_density_matrix(rho)
    p, v, _, reach = _spectral_split(r, rel_cutoff)
    tes = [_tangent_in_eigenbasis(t, v, reach) for t in tangents]
    cut = rel_cutoff * p.max()
    n = p.size
    coef = np.zeros((n, n))
    for j in range(n):
        for k in range(n):
            coef[j, k] = _monotone_coefficient(spec, p[j], p[k], cut)
    bad = ~np.isfinite(coef)
    if bad.any():
        if any(np.abs(t[bad]).max() > TANGENT_ATOL for t in tes):
            raise BoundaryDivergenceError(
                f"the {spec.name} metric diverges: its monotone function vanishes where the tangent needs it"
            )
        coef[bad] = 0.0
    f = np.array([[np.sum(coef * (a * b.conj()).real) for b in tes] for a in tes])
    return spec.normalization * 0.5 * (f + f.T)


# --------------------------------------------------------------------------
# distances


def _as_rho(state) -> np.ndarray:
    return as_density_matrix(state)


def _sqrtm_psd(rho: np.ndarray) -> np.ndarray:
    w, v = psd_eigh(rho)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def uhlmann_fidelity(rho1, rho2) -> float:
    """``(Tr sqrt(sqrt(rho1) rho2 sqrt(rho1)))^2``, clipped to [0, 1].

    A state vector argument uses the exact form ``<psi|rho|psi>``; otherwise
    the trace norm of ``sqrt(rho1) sqrt(rho2)`` is taken from its singular
    values.
    """
    vec1, vec2 = np.ndim(rho1) == 1, np.ndim(rho2) == 1
    if vec1 or vec2:
        psi = as_pure_state(rho1 if vec1 else rho2)
        other = _as_rho(rho2 if vec1 else rho1)
        if other.shape[0] != psi.size:
            raise ValueError("dimension mismatch")
        return float(np.clip(np.real(np.vdot(psi, other @ psi)), 0.0, 1.0))
    r1, r2 = _as_rho(rho1), _as_rho(rho2)
    if r1.shape != r2.shape:
        raise ValueError("dimension mismatch")
    sv = np.linalg.svd(_sqrtm_psd(r1) @ _sqrtm_psd(r2), compute_uv=False)
    return float(np.clip(np.sum(sv) ** 2, 0.0, 1.0))


def bures_distance(rho1, rho2) -> float:
    """Bures angle ``arccos sqrt(F)`` in ``[0, pi/2]``."""
    return float(np.arccos(np.sqrt(uhlmann_fidelity(rho1, rho2))))


def quantum_angle(psi1, psi2) -> float:
    """``arccos |<psi1|psi2>|`` for pure states."""
    a, b = as_pure_state(psi1), as_pure_state(psi2)
    if a.shape != b.shape:
        raise ValueError("dimension mismatch")
    return float(np.arccos(min(1.0, abs(np.vdot(a, b)))))
