"""Small finite-difference and linear-algebra helpers shared across modules."""

from __future__ import annotations

from typing import Callable

import numpy as np

HERMITIAN_ATOL = 1e-12


def default_step(x: np.ndarray, scale: float = 1e-5) -> np.ndarray:
    """Per-coordinate step ``scale * max(1, |x|)``."""
    return scale * np.maximum(1.0, np.abs(np.asarray(x, dtype=float)))


def _hessian_once(f: Callable[[np.ndarray], float], x: np.ndarray, h: np.ndarray) -> np.ndarray:
    d = x.size
    f0 = f(x)
    out = np.empty((d, d))
    for i in range(d):
        ei = np.zeros(d)
        ei[i] = h[i]
        out[i, i] = (f(x + ei) - 2.0 * f0 + f(x - ei)) / h[i] ** 2
        for j in range(i):
            ej = np.zeros(d)
            ej[j] = h[j]
            val = (f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)) / (4.0 * h[i] * h[j])
            out[i, j] = out[j, i] = val
    return out


def richardson_hessian(
    f: Callable[[np.ndarray], float], x: np.ndarray, step: np.ndarray
) -> tuple[np.ndarray, float]:
    """Central-difference Hessian extrapolated from steps ``h`` and ``h/2``.

    Returns the extrapolated Hessian and the max-abs difference between the
    two raw estimates, which callers use as a consistency diagnostic.
    """
    x = np.asarray(x, dtype=float)
    h = np.broadcast_to(np.asarray(step, dtype=float), x.shape).copy()
    coarse = _hessian_once(f, x, h)
    fine = _hessian_once(f, x, h / 2.0)
    return (4.0 * fine - coarse) / 3.0, float(np.max(np.abs(fine - coarse), initial=0.0))


def hermitian_part(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.conj().T)


def is_hermitian(a: np.ndarray, atol: float = HERMITIAN_ATOL) -> bool:
    a = np.asarray(a)
    return a.ndim == 2 and a.shape[0] == a.shape[1] and bool(np.allclose(a, a.conj().T, rtol=0.0, atol=atol))


def psd_eigh(a: np.ndarray, clip: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian PSD matrix with tiny negative eigenvalues zeroed."""
    w, v = np.linalg.eigh(hermitian_part(np.asarray(a)))
    w = np.where((w < 0.0) & (w >= -clip), 0.0, w)
    return w, v
