"""Quantum states, operators and spin-chain builders.

States and operators are plain complex numpy arrays: a pure state is a unit
vector, a density matrix is a Hermitian PSD trace-one matrix and an observable
is a Hermitian matrix. The ``as_*`` helpers validate inputs at API
boundaries.

Spin-1/2 chains use the computational basis with ``|up> = (1, 0)`` and site 0
as the leftmost tensor factor, so the most significant bit of a basis index
belongs to site 0. Spin operators default to ``S = sigma / 2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp

from ._numerics import hermitian_part, psd_eigh

DEFAULT_CAP = 14
STATE_ATOL = 1e-12
EIG_CUTOFF = 1e-14

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)
PAULI = {"x": SIGMA_X, "y": SIGMA_Y, "z": SIGMA_Z}
SIGMA_PLUS = np.array([[0, 1], [0, 0]], dtype=complex)  # |up><down|
SIGMA_MINUS = SIGMA_PLUS.T.copy()


# --------------------------------------------------------------------------
# validation


def as_pure_state(psi, atol: float = STATE_ATOL) -> np.ndarray:
    """Return ``psi`` as a complex unit vector, raising ``ValueError`` otherwise."""
    v = np.asarray(psi, dtype=complex)
    if v.ndim != 1 or v.size < 1:
        raise ValueError("a pure state must be a non-empty vector")
    norm = np.linalg.norm(v)
    if abs(norm - 1.0) > atol:
        raise ValueError(f"state norm is {norm:.15g}, not 1")
    return v


def as_hermitian(a, atol: float = STATE_ATOL) -> np.ndarray:
    """Return ``a`` as a complex Hermitian matrix, raising ``ValueError`` otherwise."""
    if sp.issparse(a):
        a = a.toarray()
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"operator must be square, got shape {m.shape}")
    scale = max(1.0, float(np.abs(m).max(initial=0.0)))
    if np.abs(m - m.conj().T).max(initial=0.0) > atol * scale:
        raise ValueError("operator is not Hermitian")
    return hermitian_part(m)


def as_density_matrix(rho, atol: float = STATE_ATOL) -> np.ndarray:
    """Validate a density matrix (Hermitian, PSD, unit trace).

    A 1-d input is treated as a pure state and converted to its projector.
    """
    r = np.asarray(rho, dtype=complex)
    if r.ndim == 1:
        v = as_pure_state(r, atol)
        return np.outer(v, v.conj())
    r = as_hermitian(r, atol)
    if abs(np.trace(r).real - 1.0) > atol:
        raise ValueError(f"trace is {np.trace(r).real:.15g}, not 1")
    if np.linalg.eigvalsh(r).min() < -atol:
        raise ValueError("density matrix has negative eigenvalues")
    return r


def projector(psi) -> np.ndarray:
    v = as_pure_state(psi)
    return np.outer(v, v.conj())


@dataclass(frozen=True)
class SpinSystem:
    """A chain of ``n_sites`` spin-1/2 sites with site 0 leftmost."""

    n_sites: int
    cap: int = DEFAULT_CAP

    def __post_init__(self) -> None:
        if self.n_sites < 1:
            raise ValueError("a spin system needs at least one site")
        if self.n_sites > self.cap:
            raise ValueError(f"{self.n_sites} sites exceed the configured cap of {self.cap}")

    @property
    def dim(self) -> int:
        return 2**self.n_sites


def _system(system: Union[SpinSystem, int]) -> SpinSystem:
    return system if isinstance(system, SpinSystem) else SpinSystem(int(system))


# --------------------------------------------------------------------------
# scalar functionals of states


def purity(rho) -> float:
    """``Tr(rho^2)``."""
    r = as_density_matrix(rho)
    return float(np.real(np.vdot(r, r)))


def _entropy_from_eigs(w: np.ndarray, base: float) -> float:
    w = w[w > EIG_CUTOFF]
    return float(-np.sum(w * np.log(w)) / np.log(base)) + 0.0


def von_neumann_entropy(rho, base: float = np.e) -> float:
    """``-Tr rho log rho`` from the eigenvalues above 1e-14."""
    w, _ = psd_eigh(as_density_matrix(rho))
    return _entropy_from_eigs(w, base)


def _check_subset(keep: Iterable[int], n: int) -> list[int]:
    keep = sorted(int(k) for k in keep)
    if not keep:
        raise ValueError("subset of kept sites is empty")
    if len(set(keep)) != len(keep) or keep[0] < 0 or keep[-1] >= n:
        raise ValueError(f"invalid site subset {keep} for {n} sites")
    if len(keep) == n:
        raise ValueError("subset must be a proper subset of the sites")
    return keep


def partial_trace(rho, keep: Sequence[int], system: Union[SpinSystem, int]) -> np.ndarray:
    """Reduced density matrix on the sites ``keep`` (kept in increasing order).

    ``rho`` may be a density matrix or a pure state vector.
    """
    sysm = _system(system)
    n = sysm.n_sites
    keep = _check_subset(keep, n)
    rest = [j for j in range(n) if j not in keep]
    dk, dr = 2 ** len(keep), 2 ** len(rest)
    arr = np.asarray(rho, dtype=complex)
    if arr.ndim == 1:
        v = as_pure_state(arr)
        if v.size != sysm.dim:
            raise ValueError("state dimension does not match the system")
        m = v.reshape([2] * n).transpose(keep + rest).reshape(dk, dr)
        return hermitian_part(m @ m.conj().T)
    r = as_density_matrix(arr)
    if r.shape[0] != sysm.dim:
        raise ValueError("state dimension does not match the system")
    perm = keep + rest + [n + j for j in keep] + [n + j for j in rest]
    t = r.reshape([2] * (2 * n)).transpose(perm).reshape(dk, dr, dk, dr)
    return hermitian_part(np.einsum("ajbj->ab", t))


def entanglement_entropy(psi, region: Sequence[int], system: Union[SpinSystem, int], base: float = 2) -> float:
    """Von Neumann entropy of the reduced state of ``psi`` on ``region``."""
    return von_neumann_entropy(partial_trace(as_pure_state(psi), region, system), base=base)


def entanglement_spectrum(rho) -> np.ndarray:
    """Eigenvalues ``-ln p`` of the entanglement Hamiltonian, ascending.

    Only eigenvalues of ``rho`` above 1e-14 contribute.
    """
    w, _ = psd_eigh(as_density_matrix(rho))
    w = w[w > EIG_CUTOFF]
    return np.sort(-np.log(w))


def gibbs_state(h, beta: float) -> np.ndarray:
    """Thermal state ``exp(-beta H) / Z`` computed in the eigenbasis of ``H``.

    ``beta = inf`` gives the uniform mixture over the ground space.
    """
    hm = as_hermitian(h)
    if beta < 0 or np.isnan(beta):
        raise ValueError("beta must be non-negative")
    e, v = np.linalg.eigh(hm)
    if np.isinf(beta):
        tol = 1e-10 * max(1.0, np.abs(e).max())
        w = (e - e[0] <= tol).astype(float)
    else:
        w = np.exp(-beta * (e - e[0]))
    w /= w.sum()
    return hermitian_part((v * w) @ v.conj().T)


# --------------------------------------------------------------------------
# expectation values


def expectation(state, a) -> float:
    """Real part of ``<psi|A|psi>`` or ``Tr(rho A)``."""
    s = np.asarray(state, dtype=complex)
    am = a if sp.issparse(a) else np.asarray(a, dtype=complex)
    if s.ndim == 1:
        return float(np.vdot(s, am @ s).real)
    return float(np.real(np.sum(s.T * (am.toarray() if sp.issparse(am) else am))))


def covariance(state, a, b) -> complex:
    """Non-symmetrized covariance ``<AB> - <A><B>``."""
    s = np.asarray(state, dtype=complex)
    am, bm = np.asarray(a, dtype=complex), np.asarray(b, dtype=complex)
    if s.ndim == 1:
        ab = np.vdot(am.conj().T @ s, bm @ s)
        ea, eb = np.vdot(s, am @ s), np.vdot(s, bm @ s)
    else:
        ab = np.trace(s @ am @ bm)
        ea, eb = np.trace(s @ am), np.trace(s @ bm)
    return complex(ab - ea * eb)


def covariance_real(state, a, b) -> float:
    """Symmetrized covariance ``Re<AB> - <A><B>``."""
    return covariance(state, a, b).real


def variance(state, a) -> float:
    return covariance_real(state, a, a)


# --------------------------------------------------------------------------
# operator builders


def site_operator(op, site: int, system: Union[SpinSystem, int], sparse: bool = False):
    """Embed a single-site 2x2 operator at ``site`` (site 0 is the leftmost factor)."""
    n = _system(system).n_sites
    if not 0 <= site < n:
        raise ValueError(f"site {site} out of range for {n} sites")
    if sparse:
        left = sp.identity(2**site, dtype=complex, format="csr")
        right = sp.identity(2 ** (n - site - 1), dtype=complex, format="csr")
        return sp.kron(sp.kron(left, sp.csr_matrix(op)), right, format="csr")
    return np.kron(np.kron(np.eye(2**site), np.asarray(op, dtype=complex)), np.eye(2 ** (n - site - 1)))


def _axis_vector(axis) -> np.ndarray:
    if isinstance(axis, str):
        key = axis.lower()
        if key not in PAULI:
            raise ValueError(f"unknown axis {axis!r}")
        return np.eye(3)["xyz".index(key)]
    n = np.asarray(axis, dtype=float).ravel()
    if n.shape != (3,) or np.linalg.norm(n) == 0.0:
        raise ValueError("axis must be a non-zero 3-vector")
    if abs(np.linalg.norm(n) - 1.0) > 1e-12:
        raise ValueError("axis must be a unit vector")
    return n


def spin_component(axis, pauli: bool = False) -> np.ndarray:
    """Single-site ``n . S`` (or ``n . sigma`` when ``pauli``)."""
    n = _axis_vector(axis)
    op = n[0] * SIGMA_X + n[1] * SIGMA_Y + n[2] * SIGMA_Z
    return op if pauli else 0.5 * op


def _weighted_sum(weights: Sequence[float], op, system: SpinSystem) -> np.ndarray:
    out = np.zeros((system.dim, system.dim), dtype=complex)
    for j, w in enumerate(weights):
        if w != 0:
            out += w * site_operator(op, j, system)
    return out


def collective_spin(axis, system: Union[SpinSystem, int], pauli: bool = False) -> np.ndarray:
    """``sum_j n . S_j``."""
    sysm = _system(system)
    return _weighted_sum([1.0] * sysm.n_sites, spin_component(axis, pauli), sysm)


def staggered_spin(axis, system: Union[SpinSystem, int], pauli: bool = False) -> np.ndarray:
    """``sum_j (-1)^j n . S_j``."""
    sysm = _system(system)
    return _weighted_sum([(-1.0) ** j for j in range(sysm.n_sites)], spin_component(axis, pauli), sysm)


def fermion_annihilator(site: int, system: Union[SpinSystem, int]) -> np.ndarray:
    """Jordan-Wigner fermion ``a_j = prod_{l<j} (-1)^{n_l} sigma^-_j`` with occupied = up."""
    sysm = _system(system)
    parity_factor = -SIGMA_Z  # (-1)^n with n = 1 on |up>
    ops = [parity_factor] * site + [SIGMA_MINUS] + [IDENTITY_2] * (sysm.n_sites - site - 1)
    return reduce(np.kron, ops)


def fermion_parity(system: Union[SpinSystem, int]) -> np.ndarray:
    """``prod_j (-1)^{n_j}``."""
    sysm = _system(system)
    return reduce(np.kron, [-SIGMA_Z] * sysm.n_sites)


def jw_string_operator(alpha: str, system: Union[SpinSystem, int]) -> np.ndarray:
    """String generator of the Kitaev wire built from Jordan-Wigner fermions.

    With ``S_j = exp(i pi sum_{l<j} n_l)`` the generators are
    ``sum_j (a_j^+ S_j + S_j a_j)`` for ``alpha = "x"`` and
    ``sum_j -i (a_j^+ S_j - S_j a_j)`` for ``alpha = "y"``. Both are odd
    under fermion parity and equal ``sum_j sigma^alpha_j`` in the spin basis.
    """
    sysm = _system(system)
    n = sysm.n_sites
    alpha = alpha.lower()
    if alpha not in ("x", "y"):
        raise ValueError("alpha must be 'x' or 'y'")
    number = [site_operator(0.5 * (IDENTITY_2 + SIGMA_Z), j, sysm) for j in range(n)]
    out = np.zeros((sysm.dim, sysm.dim), dtype=complex)
    occupied_left = np.zeros(sysm.dim)
    for j in range(n):
        string = np.diag(np.exp(1j * np.pi * occupied_left))
        a = fermion_annihilator(j, sysm)
        ad = a.conj().T
        if alpha == "x":
            out += ad @ string + string @ a
        else:
            out += -1j * (ad @ string - string @ a)
        occupied_left = occupied_left + np.diag(number[j]).real
    return hermitian_part(out)


def _chain_bonds(n: int, periodic: bool) -> list[tuple[int, int]]:
    bonds = [(j, j + 1) for j in range(n - 1)]
    if periodic and n > 2:
        bonds.append((n - 1, 0))
    return bonds


def _two_site(op_a, op_b, i: int, j: int, system: SpinSystem, sparse: bool):
    # the product is formed sparsely either way; dense products of 2^L matrices are needlessly slow
    prod = site_operator(op_a, i, system, True) @ site_operator(op_b, j, system, True)
    return prod.tocsr() if sparse else prod.toarray()


def tfim_chain(L: int, g: float, periodic: bool = True, J: float = 1.0, sparse: bool = False):
    """Transverse-field Ising chain ``-J sum sz sz - g sum sx`` (Pauli matrices).

    The critical point is ``g = J``. A periodic chain of two sites keeps a
    single bond. With ``sparse=True`` a CSR matrix is returned.
    """
    sysm = SpinSystem(L)
    h = sp.csr_matrix((sysm.dim, sysm.dim), dtype=complex) if sparse else np.zeros((sysm.dim,) * 2, dtype=complex)
    for i, j in _chain_bonds(L, periodic):
        h = h - J * _two_site(SIGMA_Z, SIGMA_Z, i, j, sysm, sparse)
    h = h + g * tfim_field_operator(L, sparse=sparse)
    return h


def tfim_field_operator(L: int, sparse: bool = False):
    """``dH/dg = -sum_j sigma^x_j`` for :func:`tfim_chain`."""
    sysm = SpinSystem(L)
    ops = [site_operator(SIGMA_X, j, sysm, sparse) for j in range(L)]
    return -reduce(lambda a, b: a + b, ops)


def xy_chain(L: int, gamma: float, h: float, periodic: bool = True) -> np.ndarray:
    """Anisotropic XY chain ``-sum [(1+g)/2 sx sx + (1-g)/2 sy sy] - h sum sz``."""
    sysm = SpinSystem(L)
    out = np.zeros((sysm.dim,) * 2, dtype=complex)
    for i, j in _chain_bonds(L, periodic):
        out -= 0.5 * (1 + gamma) * _two_site(SIGMA_X, SIGMA_X, i, j, sysm, False)
        out -= 0.5 * (1 - gamma) * _two_site(SIGMA_Y, SIGMA_Y, i, j, sysm, False)
    out -= h * collective_spin("z", sysm, pauli=True)
    return out


def heisenberg_chain(L: int, J: float = 1.0, periodic: bool = True) -> np.ndarray:
    """Heisenberg chain ``J sum S_i . S_j`` with spin-1/2 operators."""
    sysm = SpinSystem(L)
    out = np.zeros((sysm.dim,) * 2, dtype=complex)
    for i, j in _chain_bonds(L, periodic):
        for s in (SIGMA_X, SIGMA_Y, SIGMA_Z):
            out += 0.25 * J * _two_site(s, s, i, j, sysm, False)
    return out


def qwz_bloch(kx: float, ky: float, m: float) -> np.ndarray:
    """Two-band Bloch matrix ``sin kx sx + sin ky sy + (m + cos kx + cos ky) sz``."""
    return np.sin(kx) * SIGMA_X + np.sin(ky) * SIGMA_Y + (m + np.cos(kx) + np.cos(ky)) * SIGMA_Z


# --------------------------------------------------------------------------
# named states and random ensembles


def ghz_state(N: int, system: Optional[Union[SpinSystem, int]] = None) -> np.ndarray:
    """``(|up...up> + |down...down>) / sqrt(2)``."""
    if N < 2:
        raise ValueError("GHZ states need at least two sites")
    sysm = _system(system if system is not None else N)
    if sysm.n_sites != N:
        raise ValueError("N does not match the system size")
    psi = np.zeros(sysm.dim, dtype=complex)
    psi[0] = psi[-1] = 1.0 / np.sqrt(2.0)
    return psi


def product_state(*single_site_states) -> np.ndarray:
    """Tensor product of normalized single-site states, site 0 first."""
    return reduce(np.kron, [as_pure_state(s) for s in single_site_states])


def random_pure_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_density_matrix(dim: int, rng: np.random.Generator, rank: Optional[int] = None) -> np.ndarray:
    """Random mixed state ``G G^+ / Tr`` with ``G`` a ``dim x rank`` Gaussian matrix."""
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return hermitian_part(rho / np.trace(rho).real)


def random_hermitian(dim: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return scale * hermitian_part(g) / np.sqrt(2.0)
