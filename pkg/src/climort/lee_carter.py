"""Lee-Carter estimation by singular value decomposition."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import InputError, ModelError


@dataclass(frozen=True)
class LcParams:
    """``log m(x, t) = a(x) + b(x) kappa(t)`` with sum(b) = 1 and sum(kappa) = 0."""

    a: np.ndarray
    b: np.ndarray
    kappa: np.ndarray

    def fitted(self) -> np.ndarray:
        return self.a[:, None] + np.outer(self.b, self.kappa)

    def vector(self) -> np.ndarray:
        return np.concatenate([self.a, self.b, self.kappa])


def fit_lc(logm) -> tuple[LcParams, np.ndarray]:
    """Fit the Lee-Carter model to an age x time matrix of log rates.

    Returns the parameters and the fitted log-rate matrix. The sign of the
    first singular pair is chosen so the left vector sums to a positive
    number; kappa is re-centred exactly and the shift folded into ``a``.
    """
    logm = np.asarray(logm, dtype=float)
    if logm.ndim != 2:
        raise InputError(f"log-rate matrix must be 2-D, got shape {logm.shape}")
    n_age, n_t = logm.shape
    if n_age < 2 or n_t < 2:
        raise InputError(f"Lee-Carter needs at least 2 ages and 2 periods, got {logm.shape}")
    if not np.all(np.isfinite(logm)):
        raise InputError("log-rate matrix contains non-finite values")

    a = logm.mean(axis=1)
    centred = logm - a[:, None]
    u_mat, d, vt = np.linalg.svd(centred, full_matrices=False)
    u, v, d1 = u_mat[:, 0], vt[0], d[0]

    scale = max(np.abs(logm).max(), 1.0)
    if d1 <= 1e-13 * scale * np.sqrt(n_age * n_t):
        # no age-time interaction left to explain
        b = np.full(n_age, 1.0 / n_age)
        kappa = np.zeros(n_t)
        return LcParams(a, b, kappa), a[:, None] + np.zeros((1, n_t))

    su = u.sum()
    if su < 0:
        u, v, su = -u, -v, -su
    if su <= 1e-10:
        raise ModelError("degenerate Lee-Carter loadings: first left singular vector sums to 0")
    kappa = d1 * v * su
    b = u / su
    shift = kappa.mean()
    kappa = kappa - shift
    a = a + b * shift
    params = LcParams(a, b, kappa)
    return params, params.fitted()
