"""Information measures on finite probability spaces and Fisher-Rao geometry.

All entropies are computed in nats internally and converted to the requested
logarithm base at the end. Parametrized distributions are described by
:class:`ClassicalFamily`, which can carry analytic derivatives, a declared
domain, and structural flags (mixture or exponential) used by the potential
forms of the metric.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import logsumexp

from ._numerics import default_step, richardson_hessian
from .errors import BoundaryDivergenceError, InconsistencyError

PROB_CUTOFF = 1e-14
NORM_ATOL = 1e-12
HESSIAN_SCALE = 1e-3

ArrayLike = Union[Sequence[float], np.ndarray]


def _log_base(base: float) -> float:
    base = float(base)
    if base <= 0.0 or base == 1.0:
        raise ValueError(f"logarithm base must be positive and != 1, got {base}")
    return np.log(base)


@dataclass(frozen=True)
class ProbabilityVector:
    """A finite discrete distribution.

    Entries are validated to be non-negative and to sum to one within 1e-12.
    The stored array is read-only.
    """

    probs: np.ndarray

    def __post_init__(self) -> None:
        p = np.array(self.probs, dtype=float).ravel()
        if p.size < 1:
            raise ValueError("probability vector must have at least one entry")
        if not np.all(np.isfinite(p)):
            raise ValueError("probability vector contains non-finite entries")
        if np.any(p < 0.0):
            raise ValueError(f"negative probability {p.min():.3e}")
        if abs(p.sum() - 1.0) > NORM_ATOL:
            raise ValueError(f"probabilities sum to {p.sum():.15g}, not 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def dim(self) -> int:
        return self.probs.size


def as_probs(p: Union[ProbabilityVector, ArrayLike]) -> np.ndarray:
    """Validate ``p`` and return its entries as a float array."""
    if isinstance(p, ProbabilityVector):
        return p.probs
    return ProbabilityVector(np.asarray(p, dtype=float)).probs


def _same_dim(p: np.ndarray, q: np.ndarray) -> None:
    if p.shape != q.shape:
        raise ValueError(f"dimension mismatch: {p.size} vs {q.size}")


def shannon_entropy(p: Union[ProbabilityVector, ArrayLike], base: float = 2) -> float:
    """Shannon entropy ``-sum p log p`` with the convention ``0 log 0 = 0``.

    Examples
    --------
    >>> shannon_entropy([0.5, 0.5])
    1.0
    """
    p = as_probs(p)
    nz = p[p > 0.0]
    return float(-np.sum(nz * np.log(nz)) / _log_base(base)) + 0.0


def renyi_entropy(p: Union[ProbabilityVector, ArrayLike], order: float, base: float = 2) -> float:
    """Renyi entropy of order ``q >= 0, q != 1``: ``log(sum p^q) / (1 - q)``."""
    if order < 0:
        raise ValueError("Renyi order must be non-negative")
    if order == 1:
        raise ValueError("Renyi order 1 is the Shannon entropy; call shannon_entropy")
    p = as_probs(p)
    nz = p[p > 0.0]
    if order == 0:
        total = float(nz.size)
    else:
        total = float(np.sum(nz**order))
    return float(np.log(total) / (1.0 - order) / _log_base(base)) + 0.0


def relative_entropy(
    p: Union[ProbabilityVector, ArrayLike], q: Union[ProbabilityVector, ArrayLike], base: float = 2
) -> float:
    """Relative entropy ``sum p log(p/q)``; ``inf`` when ``p`` has mass where ``q`` has none."""
    p, q = as_probs(p), as_probs(q)
    _same_dim(p, q)
    support = p > 0.0
    if np.any(q[support] == 0.0):
        return float("inf")
    ps, qs = p[support], q[support]
    value = float(np.sum(ps * (np.log(ps) - np.log(qs))) / _log_base(base))
    # Roundoff can push a vanishing divergence slightly negative.
    return max(value, 0.0)


@dataclass(frozen=True)
class KraftResult:
    satisfied: bool
    slack: float


def kraft_check(lengths: Sequence[int], alphabet_size: int = 2) -> KraftResult:
    """Check the Kraft inequality ``sum a^(-L_i) <= 1`` for codeword lengths ``L_i``."""
    lengths = np.asarray(lengths)
    if lengths.size == 0:
        raise ValueError("empty list of codeword lengths")
    if alphabet_size < 2:
        raise ValueError("alphabet size must be at least 2")
    if np.any(lengths < 1) or not np.all(lengths == np.round(lengths)):
        raise ValueError("codeword lengths must be positive integers")
    slack = 1.0 - float(np.sum(float(alphabet_size) ** (-lengths.astype(float))))
    return KraftResult(satisfied=slack >= -1e-12, slack=slack)


def sanov_bound(
    p: Union[ProbabilityVector, ArrayLike], q: Union[ProbabilityVector, ArrayLike], n_samples: int
) -> float:
    """Upper bound ``(n+1)^D 2^(-n S(P|Q))`` on the probability that ``n`` draws from Q look like P."""
    p, q = as_probs(p), as_probs(q)
    _same_dim(p, q)
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    s_bits = relative_entropy(p, q, base=2)
    if np.isinf(s_bits):
        return 0.0
    return float((n_samples + 1.0) ** p.size * 2.0 ** (-n_samples * s_bits))


def classical_fidelity(p: Union[ProbabilityVector, ArrayLike], q: Union[ProbabilityVector, ArrayLike]) -> float:
    """Bhattacharyya coefficient ``sum sqrt(p q)``, clipped to [0, 1]."""
    p, q = as_probs(p), as_probs(q)
    _same_dim(p, q)
    return float(np.clip(np.sum(np.sqrt(p * q)), 0.0, 1.0))


def bhattacharyya_distance(p: Union[ProbabilityVector, ArrayLike], q: Union[ProbabilityVector, ArrayLike]) -> float:
    """Angle ``arccos`` of the classical fidelity, in ``[0, pi/2]``."""
    return float(np.arccos(classical_fidelity(p, q)))


@dataclass(frozen=True)
class ClassicalFamily:
    """A smooth map from parameters to probability vectors.

    Attributes
    ----------
    n_params:
        Dimension of the parameter space.
    evaluate:
        ``lam -> probs`` with ``lam`` a float array of length ``n_params``.
    derivative:
        Optional ``lam -> (D, n_params)`` array of ``dp_i / dlam_mu``.
    kind:
        ``"generic"``, ``"mixture"`` (probabilities affine in the parameters)
        or ``"exponential"`` (log-probabilities affine, requires ``log_normalizer``).
    log_normalizer:
        ``lam -> psi(lam)`` for exponential families.
    domain:
        Per-parameter ``(low, high)`` bounds, or ``None`` for unbounded.
    estimator:
        Optional unbiased estimator ``counts -> lam`` for one-parameter families.
    """

    n_params: int
    evaluate: Callable[[np.ndarray], ArrayLike]
    derivative: Optional[Callable[[np.ndarray], np.ndarray]] = None
    kind: str = "generic"
    log_normalizer: Optional[Callable[[np.ndarray], float]] = None
    domain: Optional[tuple[tuple[float, float], ...]] = None
    estimator: Optional[Callable[[np.ndarray], float]] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.n_params < 1:
            raise ValueError("a family needs at least one parameter")
        if self.kind not in ("generic", "mixture", "exponential"):
            raise ValueError(f"unknown family kind {self.kind!r}")
        if self.kind == "exponential" and self.log_normalizer is None:
            raise ValueError("exponential families must supply log_normalizer")
        if self.domain is not None and len(self.domain) != self.n_params:
            raise ValueError("domain must give one interval per parameter")

    def params(self, lam: Union[float, ArrayLike]) -> np.ndarray:
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        if lam.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got shape {lam.shape}")
        return lam

    def in_domain(self, lam: np.ndarray) -> bool:
        if self.domain is None:
            return True
        return all(lo <= x <= hi for x, (lo, hi) in zip(lam, self.domain))

    def probabilities(self, lam: Union[float, ArrayLike]) -> np.ndarray:
        lam = self.params(lam)
        if not self.in_domain(lam):
            raise ValueError(f"parameters {lam} outside the declared domain {self.domain}")
        return as_probs(self.evaluate(lam))


def coin_family() -> ClassicalFamily:
    """Two-outcome family ``p = (lam, 1 - lam)`` on ``[0, 1]``."""
    return ClassicalFamily(
        n_params=1,
        evaluate=lambda lam: np.array([lam[0], 1.0 - lam[0]]),
        derivative=lambda lam: np.array([[1.0], [-1.0]]),
        kind="mixture",
        domain=((0.0, 1.0),),
        estimator=lambda counts: counts[0] / np.sum(counts),
    )


def mixture_family(components: ArrayLike) -> ClassicalFamily:
    """Family ``p = c_0 + sum_mu lam_mu (c_mu - c_0)`` spanned by distributions ``c``.

    ``components`` has shape ``(d + 1, D)``. The domain is not bounded
    automatically; invalid points surface as validation errors.
    """
    c = np.array([as_probs(row) for row in np.asarray(components, dtype=float)])
    if c.shape[0] < 2:
        raise ValueError("need at least two component distributions")
    directions = (c[1:] - c[0]).T  # (D, d)

    return ClassicalFamily(
        n_params=c.shape[0] - 1,
        evaluate=lambda lam: c[0] + directions @ lam,
        derivative=lambda lam: directions.copy(),
        kind="mixture",
    )


def exponential_family(statistics: ArrayLike, base_measure: Optional[ArrayLike] = None) -> ClassicalFamily:
    """Family ``p_i = q_i exp(sum_mu lam_mu T_i,mu - psi(lam))``.

    Parameters
    ----------
    statistics:
        ``(D, d)`` array of sufficient statistics ``T``.
    base_measure:
        Optional positive weights ``q``; uniform by default.
    """
    t = np.asarray(statistics, dtype=float)
    if t.ndim == 1:
        t = t[:, None]
    log_q = np.zeros(t.shape[0]) if base_measure is None else np.log(np.asarray(base_measure, dtype=float))

    def psi(lam: np.ndarray) -> float:
        return float(logsumexp(log_q + t @ lam))

    def evaluate(lam: np.ndarray) -> np.ndarray:
        logits = log_q + t @ lam
        w = np.exp(logits - logits.max())
        return w / w.sum()

    def derivative(lam: np.ndarray) -> np.ndarray:
        p = evaluate(lam)
        return p[:, None] * (t - p @ t)

    return ClassicalFamily(
        n_params=t.shape[1],
        evaluate=evaluate,
        derivative=derivative,
        kind="exponential",
        log_normalizer=psi,
    )


def _jacobian(family: ClassicalFamily, lam: np.ndarray, mode: str, step: Optional[float]) -> np.ndarray:
    if mode == "analytic":
        if family.derivative is None:
            raise ValueError("family has no analytic derivative; use mode='central'")
        jac = np.asarray(family.derivative(lam), dtype=float).reshape(-1, family.n_params)
        if np.any(np.abs(jac.sum(axis=0)) > 1e-10):
            raise ValueError("analytic derivative columns must sum to zero")
        return jac
    if mode != "central":
        raise ValueError(f"unknown derivative mode {mode!r}")
    h = default_step(lam) if step is None else np.full(lam.shape, float(step))
    cols = []
    for mu in range(family.n_params):
        e = np.zeros_like(lam)
        e[mu] = h[mu]
        cols.append((family.probabilities(lam + e) - family.probabilities(lam - e)) / (2.0 * h[mu]))
    return np.stack(cols, axis=1)


def cfim(
    family: ClassicalFamily,
    lam: Union[float, ArrayLike],
    mode: str = "analytic",
    step: Optional[float] = None,
) -> np.ndarray:
    """Classical Fisher information metric ``(1/4) sum_i dp_i dp_i / p_i``.

    Outcomes with ``p_i`` below 1e-14 are dropped when their derivative also
    vanishes; otherwise the metric diverges and
    :class:`~qig.errors.BoundaryDivergenceError` is raised.

    Parameters
    ----------
    mode:
        ``"analytic"`` uses ``family.derivative``; ``"central"`` uses central
        differences with step ``step`` (default ``1e-5 * max(1, |lam|)``).
    """
    lam = family.params(lam)
    p = family.probabilities(lam)
    jac = _jacobian(family, lam, mode, step)
    small = p < PROB_CUTOFF
    if np.any(np.abs(jac[small]) > PROB_CUTOFF):
        raise BoundaryDivergenceError(f"Fisher metric diverges at {lam}: a vanishing probability still moves")
    keep = ~small
    j = jac[keep]
    f = 0.25 * j.T @ (j / p[keep, None])
    return 0.5 * (f + f.T)


def _check_boundary(family: ClassicalFamily, lam: np.ndarray) -> None:
    p = family.probabilities(lam)
    if np.any(p < PROB_CUTOFF):
        mode = "analytic" if family.derivative is not None else "central"
        cfim(family, lam, mode=mode)


def _hessian_step(family: ClassicalFamily, lam: np.ndarray) -> np.ndarray:
    h = default_step(lam, HESSIAN_SCALE)
    if family.domain is not None:
        for mu, (lo, hi) in enumerate(family.domain):
            room = min(lam[mu] - lo, hi - lam[mu])
            h[mu] = min(h[mu], 0.25 * room)
            if h[mu] <= 0.0:
                raise BoundaryDivergenceError(f"no room for a finite difference at {lam}")
    return h


def metric_from_mixture_potential(family: ClassicalFamily, lam: Union[float, ArrayLike]) -> np.ndarray:
    """Fisher metric as ``-(1/4)`` times the Hessian of the Shannon entropy (nats).

    Valid only for mixture families, where it coincides with :func:`cfim`.
    The Hessian uses central differences with Richardson extrapolation.
    """
    if family.kind != "mixture":
        raise ValueError("the entropy potential applies to mixture families only")
    lam = family.params(lam)
    _check_boundary(family, lam)
    hess, _ = richardson_hessian(
        lambda x: shannon_entropy(family.probabilities(x), base=np.e), lam, _hessian_step(family, lam)
    )
    return -0.25 * hess


def metric_from_exponential_potential(family: ClassicalFamily, lam: Union[float, ArrayLike]) -> np.ndarray:
    """Fisher metric as ``+(1/4)`` times the Hessian of the log-normalizer.

    Raises :class:`~qig.errors.InconsistencyError` when the Hessian is not
    positive semidefinite, which cannot happen for a genuine log-partition
    function.
    """
    if family.log_normalizer is None:
        raise ValueError("family does not provide a log-normalizer")
    lam = family.params(lam)
    hess, _ = richardson_hessian(lambda x: family.log_normalizer(x), lam, _hessian_step(family, lam))
    metric = 0.25 * 0.5 * (hess + hess.T)
    lowest = np.linalg.eigvalsh(metric).min()
    if lowest < -1e-8 * max(1.0, np.abs(metric).max()):
        raise InconsistencyError(f"log-normalizer Hessian is not PSD (lowest eigenvalue {lowest:.3e})")
    return metric


@dataclass(frozen=True)
class EstimatorRun:
    """Outcome of repeated estimation of a single parameter from sampled data."""

    samples: int
    trials: int
    seed: int
    estimates: np.ndarray
    crb: float

    def __post_init__(self) -> None:
        if self.trials < 2:
            raise ValueError("need at least two trials to estimate a variance")

    @property
    def empirical_variance(self) -> float:
        return float(np.var(self.estimates, ddof=1))

    @property
    def mean(self) -> float:
        return float(np.mean(self.estimates))


def _mle(family: ClassicalFamily, counts: np.ndarray) -> float:
    if family.domain is None:
        raise ValueError("maximum likelihood needs a bounded domain")
    lo, hi = family.domain[0]

    def nll(x: float) -> float:
        p = family.evaluate(np.array([x]))
        with np.errstate(divide="ignore"):
            logp = np.where(counts > 0, np.log(np.maximum(p, 1e-300)), 0.0)
        return -float(np.dot(counts, logp))

    res = minimize_scalar(nll, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    return float(res.x)


def crb_monte_carlo(
    family: ClassicalFamily,
    lam: float,
    samples: int,
    trials: int,
    seed: int,
    estimator: Optional[Callable[[np.ndarray], float]] = None,
) -> EstimatorRun:
    """Sample ``trials`` data sets of ``samples`` draws and estimate ``lam`` in each.

    The Cramer-Rao bound is ``1 / (4 M F)`` with ``F`` from :func:`cfim`.
    Every trial draws from its own generator spawned from ``seed``, so results
    do not depend on evaluation order.
    """
    if family.n_params != 1:
        raise ValueError("crb_monte_carlo handles one-parameter families")
    if samples < 1:
        raise ValueError("samples must be >= 1")
    lam_arr = family.params(lam)
    p = family.probabilities(lam_arr)
    mode = "analytic" if family.derivative is not None else "central"
    fisher = float(cfim(family, lam_arr, mode=mode)[0, 0])
    if not fisher > 0.0:
        raise BoundaryDivergenceError("Fisher information vanishes; the Cramer-Rao bound is undefined")
    est = estimator or family.estimator or (lambda counts: _mle(family, counts))
    children = np.random.SeedSequence(seed).spawn(trials)
    estimates = np.empty(trials)
    for t, child in enumerate(children):
        counts = np.random.default_rng(child).multinomial(samples, p)
        estimates[t] = est(counts)
    return EstimatorRun(
        samples=samples, trials=trials, seed=seed, estimates=estimates, crb=1.0 / (4.0 * samples * fisher)
    )
