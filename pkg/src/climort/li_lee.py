"""Li-Lee multi-population model via the product-ratio decomposition."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import InputError
from .lee_carter import LcParams, fit_lc


@dataclass(frozen=True)
class LlParams:
    """Common (A_p, B, K) and per-region (a_i, b_i, kappa_i) Lee-Carter factors.

    Arrays are shaped ``A`` (age, region), ``B`` (age,), ``K`` (time,),
    ``b`` (age, region), ``kappa`` (time, region). Loadings follow the
    Lee-Carter convention of summing to one.
    """

    A: np.ndarray
    B: np.ndarray
    K: np.ndarray
    b: np.ndarray
    kappa: np.ndarray

    @property
    def n_regions(self) -> int:
        return self.A.shape[1]

    def fitted(self) -> np.ndarray:
        common = np.outer(self.B, self.K)[:, :, None]
        specific = np.einsum("xi,ti->xti", self.b, self.kappa)
        return self.A[:, None, :] + common + specific

    def common(self) -> LcParams:
        """Product-term parameters with ``A_p`` = mean of ``A`` over regions."""
        return LcParams(self.A.mean(axis=1), self.B, self.K)

    def region(self, i: int) -> LcParams:
        return LcParams(self.A[:, i] - self.A.mean(axis=1), self.b[:, i], self.kappa[:, i])

    def vector(self) -> np.ndarray:
        return np.concatenate([self.A.ravel(), self.B, self.K, self.b.ravel(), self.kappa.ravel()])


def product_ratio(logM) -> tuple[np.ndarray, np.ndarray]:
    """Log geometric mean across regions and log ratios to it."""
    logM = np.asarray(logM, dtype=float)
    log_p = logM.mean(axis=2)
    return log_p, logM - log_p[:, :, None]


def fit_ll(logM) -> tuple[LlParams, np.ndarray]:
    """Fit the Li-Lee model to an age x time x region tensor of log rates."""
    logM = np.asarray(logM, dtype=float)
    if logM.ndim != 3:
        raise InputError(f"log-rate tensor must be 3-D, got shape {logM.shape}")
    if logM.shape[2] < 2:
        raise InputError("Li-Lee needs at least two regions")
    if not np.all(np.isfinite(logM)):
        raise InputError("log-rate tensor contains non-finite values")
    log_p, log_r = product_ratio(logM)
    common, fit_p = fit_lc(log_p)
    n = logM.shape[2]
    A = np.empty((logM.shape[0], n))
    b = np.empty((logM.shape[0], n))
    kappa = np.empty((logM.shape[1], n))
    fitted = np.empty_like(logM)
    for i in range(n):
        ratio, fit_r = fit_lc(log_r[:, :, i])
        A[:, i] = common.a + ratio.a
        b[:, i] = ratio.b
        kappa[:, i] = ratio.kappa
        fitted[:, :, i] = fit_p + fit_r
    return LlParams(A, common.b, common.kappa, b, kappa), fitted
