"""Backfitting of a stochastic mortality model and age-specific DLNMs.

Each iteration fits the stochastic model to the current log-rate array,
takes partial residuals (log rates minus the fitted age intercepts), fits a
DLNM to them per cell and removes the fitted DLNM part before the next
iteration. Iteration stops once the stochastic parameters change by less
than ``tol`` in sup-norm, or after ``max_iter`` iterations. The climate
component is the sum of the DLNM fits of iterations ``0 .. r-1``.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .dlnm import DlnmFit, check_full_rank, fit_dlnm, zero_columns
from .exceptions import EquivalenceError, InputError, ModelError
from .lee_carter import LcParams, fit_lc
from .li_lee import LlParams, fit_ll

log = logging.getLogger(__name__)

VARIANTS = ("dlnm-lc", "dlnm-ll")


@dataclass(frozen=True, eq=False)
class FittedModel:
    """Converged backfit for one region (``dlnm-lc``) or a set of regions (``dlnm-ll``).

    Arrays indexed by cell are shaped (age, region, ...) with a single region
    for the Lee-Carter variant.
    """

    variant: str
    params: LcParams | LlParams
    log_rates: np.ndarray            # (age, time, region)
    designs: np.ndarray              # (region, time, p)
    zeta_iterations: np.ndarray      # (r, age, region, p)
    refits: list = field(repr=False)  # [age][region] -> DlnmFit of the single refit
    n_iter: int = 0
    converged: bool = False
    trace: tuple = ()
    rss_trace: tuple = ()
    tol: float = 1e-2
    max_iter: int = 20

    @property
    def zeta_total(self) -> np.ndarray:
        """Summed DLNM coefficients, shape (age, region, p)."""
        return self.zeta_iterations.sum(axis=0)

    @property
    def n_regions(self) -> int:
        return self.log_rates.shape[2]

    def stochastic(self) -> np.ndarray:
        if self.variant == "dlnm-lc":
            return self.params.fitted()[:, :, None]
        return self.params.fitted()

    def climate_component(self) -> np.ndarray:
        """In-sample summed DLNM component S, shape (age, time, region)."""
        return np.einsum("itp,xip->xti", self.designs, self.zeta_total)

    def fitted(self) -> np.ndarray:
        return self.stochastic() + self.climate_component()

    def residuals(self) -> np.ndarray:
        return self.log_rates - self.fitted()

    def residual_variance(self) -> np.ndarray:
        """Per (age, region) residual variance from the single-DLNM refits."""
        return np.array([[f.sigma2 for f in row] for row in self.refits])

    def cell_fit(self, age: int, region: int = 0) -> DlnmFit:
        """DLNM fit carrying the summed coefficients and the refit covariance."""
        f = self.refits[age][region]
        return f.with_coef(self.zeta_total[age, region])


def _as_design(X):
    return np.asarray(getattr(X, "matrix", X), dtype=float)


def _cell_coefs(e, designs, pinvs):
    # e: (age, time, region) -> (age, region, p)
    return np.einsum("ipt,xti->xip", pinvs, e)


def _run(logM, designs, fit_stochastic, intercepts, tol, max_iter, names):
    if max_iter < 1:
        raise InputError("max_iter must be >= 1")
    if not tol > 0:
        raise InputError("tol must be positive")
    if not np.all(np.isfinite(logM)):
        raise ModelError("non-finite log rates at iteration 0")
    pinvs = []
    for i, X in enumerate(designs):
        active = ~zero_columns(X)
        if not active.all():
            dropped = [n for n, a in zip(names, active) if not a]
            warnings.warn(f"design {i}: column(s) {', '.join(dropped)} identically zero; "
                          "coefficients fixed at 0", stacklevel=3)
        check_full_rank(X[:, active], [n for n, a in zip(names, active) if a])
        pinv = np.zeros((X.shape[1], X.shape[0]))
        pinv[active] = np.linalg.pinv(X[:, active])
        pinvs.append(pinv)
    pinvs = np.stack(pinvs)

    current = logM.copy()
    zetas, trace, rss = [], [], []
    prev_theta = None
    params = None
    r = None
    for j in range(max_iter + 1):
        params, fitted = fit_stochastic(current)
        theta = params.vector()
        rss.append(float(np.sum((current - fitted) ** 2)))
        e = current - intercepts(params)
        if not np.all(np.isfinite(e)):
            raise ModelError(f"non-finite partial residuals at iteration {j}")
        zeta = _cell_coefs(e, designs, pinvs)
        zetas.append(zeta)
        ehat = np.einsum("itp,xip->xti", designs, zeta)
        change = None if prev_theta is None else float(np.max(np.abs(theta - prev_theta)))
        if change is not None:
            trace.append(change)
        log.debug("backfit iteration %d: sup change %s", j, change)
        if j == max_iter or (change is not None and change < tol):
            r = j
            break
        current = current - ehat
        prev_theta = theta
    converged = bool(trace) and trace[-1] < tol
    return params, np.stack(zetas[:r]), r, converged, tuple(trace), tuple(rss)


def _refits(model_log, stoch, designs, names, lag_meta):
    out = []
    partial = model_log - stoch
    for x in range(model_log.shape[0]):
        row = []
        for i, X in enumerate(designs):
            row.append(fit_dlnm(partial[x, :, i], _Design(X, names, *lag_meta[i]), check_rank=False))
        out.append(row)
    return out


@dataclass
class _Design:
    matrix: np.ndarray
    columns: list
    exposure_basis: object = None
    lag_basis: object = None
    lag_max: int | None = None


def _meta(X):
    return (getattr(X, "exposure_basis", None), getattr(X, "lag_basis", None),
            getattr(X, "lag_max", None))


def _names(X, p):
    cols = getattr(X, "columns", None)
    return list(cols) if cols is not None and len(cols) == p else [f"x{j}" for j in range(p)]


def backfit_lc(log_rates, design, tol: float = 1e-2, max_iter: int = 20) -> FittedModel:
    """Backfit DLNM + Lee-Carter on one region.

    ``log_rates`` is (age, time); ``design`` is the (time, p) DLNM design,
    either an array or a :class:`~climort.splines.CrossBasis`.
    """
    logm = np.asarray(log_rates, dtype=float)
    if logm.ndim != 2:
        raise InputError(f"log rates must be (age, time), got {logm.shape}")
    X = _as_design(design)
    if X.shape[0] != logm.shape[1]:
        raise InputError(f"design has {X.shape[0]} rows for {logm.shape[1]} weeks")
    names = _names(design, X.shape[1])

    def fit_stoch(cur):
        p, f = fit_lc(cur[:, :, 0])
        return p, f[:, :, None]

    params, zetas, r, conv, trace, rss = _run(
        logm[:, :, None], X[None], fit_stoch, lambda p: p.a[:, None, None], tol, max_iter, names
    )
    refits = _refits(logm[:, :, None], params.fitted()[:, :, None], X[None], names, [_meta(design)])
    return FittedModel("dlnm-lc", params, logm[:, :, None], X[None], zetas, refits,
                       r, conv, trace, rss, tol, max_iter)


def backfit_ll(log_rates, designs, tol: float = 1e-2, max_iter: int = 20) -> FittedModel:
    """Backfit DLNM + Li-Lee on an (age, time, region) log-rate tensor.

    ``designs`` holds one (time, p) design per region.
    """
    logM = np.asarray(log_rates, dtype=float)
    if logM.ndim != 3:
        raise InputError(f"log rates must be (age, time, region), got {logM.shape}")
    if logM.shape[2] < 2:
        raise InputError("the Li-Lee variant needs at least two regions")
    if len(designs) != logM.shape[2]:
        raise InputError(f"{len(designs)} designs for {logM.shape[2]} regions")
    Xs = np.stack([_as_design(d) for d in designs])
    if Xs.shape[1] != logM.shape[1]:
        raise InputError(f"designs have {Xs.shape[1]} rows for {logM.shape[1]} weeks")
    names = _names(designs[0], Xs.shape[2])
    params, zetas, r, conv, trace, rss = _run(
        logM, Xs, fit_ll, lambda p: p.A[:, None, :], tol, max_iter, names
    )
    refits = _refits(logM, params.fitted(), Xs, names, [_meta(d) for d in designs])
    return FittedModel("dlnm-ll", params, logM, Xs, zetas, refits, r, conv, trace, rss, tol, max_iter)


@dataclass(frozen=True)
class EquivalenceReport:
    max_abs_diff: float
    worst_cell: tuple
    worst_coef: str
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_abs_diff < self.tol

    def __str__(self):
        status = "pass" if self.passed else "FAIL"
        return (f"{status}: max |zeta_single - sum zeta_j| = {self.max_abs_diff:.3e} "
                f"(tol {self.tol:g}) at cell {self.worst_cell}, coefficient {self.worst_coef}")


def check_equivalence(model: FittedModel, tol: float = 1e-6, raise_on_fail: bool = False) -> EquivalenceReport:
    """Compare summed per-iteration coefficients with one DLNM refit.

    The refit regresses ``log m - stochastic component`` on the design.
    """
    single = np.array([[f.coef for f in row] for row in model.refits])
    diff = np.abs(single - model.zeta_total)
    idx = np.unravel_index(int(np.argmax(diff)), diff.shape)
    cols = model.refits[0][0].columns
    report = EquivalenceReport(float(diff[idx]), (int(idx[0]), int(idx[1])),
                               str(cols[idx[2]]) if cols else str(idx[2]), tol)
    if raise_on_fail and not report.passed:
        raise EquivalenceError(str(report))
    return report
