"""Least-squares DLNM fits, coefficient bootstrap and response curves."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd
import scipy.linalg

from .exceptions import InputError, ModelError, RankDeficientError

Z_95 = 1.959963984540054


@dataclass(frozen=True, eq=False)
class DlnmFit:
    """OLS coefficients on the cross-basis design with their covariance.

    Coefficients follow the design column order: cross-basis block, HWD,
    CWD, intercept.
    """

    coef: np.ndarray
    cov: np.ndarray
    sigma2: float
    n_obs: int
    columns: tuple = ()
    exposure_basis: object = None
    lag_basis: object = None
    lag_max: int | None = None

    @property
    def n_cross(self) -> int:
        return self.exposure_basis.df * self.lag_basis.df

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.cov), 0.0, None))

    def with_coef(self, coef, cov=None) -> "DlnmFit":
        cov = self.cov if cov is None else cov
        return DlnmFit(np.asarray(coef, float), cov, self.sigma2, self.n_obs, self.columns,
                       self.exposure_basis, self.lag_basis, self.lag_max)


def _column_names(X, n):
    cols = getattr(X, "columns", None)
    return tuple(cols) if cols is not None and len(cols) == n else tuple(f"x{j}" for j in range(n))


def check_full_rank(X: np.ndarray, names=None, rtol: float = 1e-10):
    """Raise :class:`RankDeficientError` naming columns outside the pivoted rank."""
    n, p = X.shape
    names = names or [f"x{j}" for j in range(p)]
    if n <= p:
        raise RankDeficientError(f"need more observations than coefficients (n={n}, p={p})")
    _, r, piv = scipy.linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    rank = int(np.sum(diag > rtol * diag[0])) if diag.size and diag[0] > 0 else 0
    if rank < p:
        bad = [names[j] for j in piv[rank:]]
        raise RankDeficientError(
            f"design has rank {rank} < {p} columns; collinear columns: {', '.join(bad)}", bad
        )


def zero_columns(X: np.ndarray) -> np.ndarray:
    """Mask of columns that are identically zero (e.g. no wave days at all)."""
    return ~np.any(np.asarray(X) != 0, axis=0)


def fit_dlnm(residuals, X, check_rank: bool = True) -> DlnmFit:
    """Regress weekly partial residuals on the DLNM design by least squares.

    ``X`` is either a :class:`~climort.splines.CrossBasis` or a plain matrix.
    The covariance is ``sigma2 (X'X)^-1`` with ``sigma2 = RSS / (n - p)``.
    Identically zero columns get coefficient 0 and zero variance.
    """
    mat = np.asarray(getattr(X, "matrix", X), dtype=float)
    e = np.asarray(residuals, dtype=float)
    if mat.ndim != 2 or e.ndim != 1 or mat.shape[0] != e.shape[0]:
        raise InputError(f"residuals ({e.shape}) and design ({mat.shape}) do not align")
    if not np.all(np.isfinite(e)):
        raise ModelError("non-finite partial residuals")
    names = _column_names(X, mat.shape[1])
    n, p_all = mat.shape
    active = ~zero_columns(mat)
    sub = mat[:, active]
    if check_rank:
        check_full_rank(sub, [c for c, a in zip(names, active) if a])
    p = sub.shape[1]
    coef = np.zeros(p_all)
    coef[active], *_ = np.linalg.lstsq(sub, e, rcond=None)
    resid = e - sub @ coef[active]
    sigma2 = float(resid @ resid) / (n - p)
    xtx_inv = np.linalg.inv(sub.T @ sub)
    cov = np.zeros((p_all, p_all))
    cov[np.ix_(active, active)] = sigma2 * (xtx_inv + xtx_inv.T) / 2
    return DlnmFit(coef, cov, sigma2, n, names,
                   getattr(X, "exposure_basis", None), getattr(X, "lag_basis", None),
                   getattr(X, "lag_max", None))


def _sym_factor(cov, tol=1e-10):
    cov = (np.asarray(cov, float) + np.asarray(cov, float).T) / 2
    w, v = np.linalg.eigh(cov)
    top = max(w.max(initial=0.0), 0.0)
    if w.size and w.min() < -tol * max(top, 1e-300) and w.min() < -1e-14:
        raise ModelError(f"covariance is not positive semi-definite (min eigenvalue {w.min():.3g})")
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.T


def bootstrap_coeffs(fit: DlnmFit, B: int, seed=None) -> np.ndarray:
    """``B`` parametric bootstrap draws from N(coef, cov), shape (B, p)."""
    if B < 1:
        raise InputError("number of bootstrap draws must be >= 1")
    root = _sym_factor(fit.cov)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((B, fit.coef.size))
    return fit.coef + z @ root


@dataclass(frozen=True)
class ResponseCurve:
    """Relative risk along a grid of UTCI values or lags."""

    x: np.ndarray
    log_rr: np.ndarray
    rr: np.ndarray
    rr_lo: np.ndarray
    rr_hi: np.ndarray
    reference: float
    extrapolated: np.ndarray | None = None

    def to_frame(self, x_name: str = "utci") -> pd.DataFrame:
        return pd.DataFrame({x_name: self.x, "log_rr": self.log_rr, "rr": self.rr,
                             "rr_lo": self.rr_lo, "rr_hi": self.rr_hi})


def _require_basis(fit):
    if fit.exposure_basis is None or fit.lag_basis is None:
        raise InputError("fit carries no spline bases; fit it on a CrossBasis")


def _lag_matrix(fit):
    return fit.lag_basis(np.arange(fit.lag_max + 1))


def cumulative_gradient(fit: DlnmFit, u, reference: float) -> np.ndarray:
    """Rows g(u) with ``g(u) @ coef`` = overall cumulative log-RR vs reference."""
    _require_basis(fit)
    u = np.atleast_1d(np.asarray(u, float))
    diff = fit.exposure_basis(u) - fit.exposure_basis(np.array([reference]))
    lag_sum = _lag_matrix(fit).sum(axis=0)
    g = np.zeros((u.size, fit.coef.size))
    g[:, :fit.n_cross] = np.einsum("gk,m->gkm", diff, lag_sum).reshape(u.size, -1)
    return g


def cumulative_log_rr(fit: DlnmFit, u) -> np.ndarray:
    """Overall cumulative effect at constant exposure ``u`` (no reference)."""
    _require_basis(fit)
    u = np.atleast_1d(np.asarray(u, float))
    lag_sum = _lag_matrix(fit).sum(axis=0)
    eta = fit.coef[:fit.n_cross].reshape(fit.exposure_basis.df, fit.lag_basis.df)
    return fit.exposure_basis(u) @ eta @ lag_sum


def optimal_utci(fit: DlnmFit, step: float = 0.1) -> float:
    """Minimum-risk exposure on a fine grid over the knot range."""
    lo, hi = fit.exposure_basis.boundary
    grid = np.arange(lo, hi + step / 2, step)
    return float(grid[np.argmin(cumulative_log_rr(fit, grid))])


def _curve(x, g, fit, reference, extrapolated=None):
    log_rr = g @ fit.coef
    sd = np.sqrt(np.clip(np.einsum("gp,pq,gq->g", g, fit.cov, g), 0.0, None))
    return ResponseCurve(x, log_rr, np.exp(log_rr), np.exp(log_rr - Z_95 * sd),
                         np.exp(log_rr + Z_95 * sd), reference, extrapolated)


def overall_cumulative_curve(fit: DlnmFit, grid=None, reference: float | None = None) -> ResponseCurve:
    """Overall cumulative RR over lags 0..L with delta-method 95% bounds.

    ``reference`` defaults to the minimum-risk UTCI; grid points outside the
    exposure knot range are flagged in ``extrapolated``.
    """
    _require_basis(fit)
    lo, hi = fit.exposure_basis.boundary
    grid = np.arange(np.floor(lo), np.ceil(hi) + 0.5, 1.0) if grid is None else np.asarray(grid, float)
    ref = optimal_utci(fit) if reference is None else float(reference)
    g = cumulative_gradient(fit, grid, ref)
    return _curve(grid, g, fit, ref, (grid < lo) | (grid > hi))


def lag_slice(fit: DlnmFit, u: float, reference: float | None = None) -> ResponseCurve:
    """RR at each lag 0..L for a constant exposure ``u`` against the reference."""
    _require_basis(fit)
    ref = optimal_utci(fit) if reference is None else float(reference)
    diff = (fit.exposure_basis(np.array([u])) - fit.exposure_basis(np.array([ref])))[0]
    lm = _lag_matrix(fit)
    g = np.zeros((lm.shape[0], fit.coef.size))
    g[:, :fit.n_cross] = np.einsum("k,lm->lkm", diff, lm).reshape(lm.shape[0], -1)
    return _curve(np.arange(lm.shape[0]), g, fit, ref)
