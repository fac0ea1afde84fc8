"""Natural cubic spline bases and the exposure-lag cross-basis."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BSpline
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .data import DailyClimateSeries
from .exceptions import InputError
from .waves import wave_counts


@dataclass(frozen=True, eq=False)
class NaturalCubicBasis:
    """Natural cubic spline basis on ``knots`` (boundary knots at both ends).

    The span is the space of cubic splines with the given knots that are
    linear beyond the boundary knots. With ``intercept=False`` the function
    that is 1 at the lower boundary is dropped, leaving ``len(knots) - 1``
    columns; otherwise there are ``len(knots)``.
    """

    knots: np.ndarray
    intercept: bool = False
    _t: np.ndarray = field(init=False, repr=False)
    _proj: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        k = np.asarray(self.knots, dtype=float)
        if k.ndim != 1 or k.size < 2:
            raise InputError("natural spline needs at least two knots")
        if not np.all(np.isfinite(k)) or np.any(np.diff(k) <= 0):
            raise InputError(f"knots must be finite and strictly increasing: {k}")
        object.__setattr__(self, "knots", k)
        t = np.r_[[k[0]] * 4, k[1:-1], [k[-1]] * 4]
        nb = t.size - 4
        spl = BSpline(t, np.eye(nb), 3)
        const = spl.derivative(2)(np.array([k[0], k[-1]]))
        if not self.intercept:
            const = const[:, 1:]
        q, _ = np.linalg.qr(const.T, mode="complete")
        object.__setattr__(self, "_t", t)
        object.__setattr__(self, "_proj", q[:, 2:])

    @property
    def df(self) -> int:
        return self._proj.shape[1]

    @property
    def boundary(self):
        return self.knots[0], self.knots[-1]

    def _raw(self, x, nu=0):
        nb = self._t.size - 4
        spl = BSpline(self._t, np.eye(nb), 3)
        if nu:
            spl = spl.derivative(nu)
        b = spl(x)
        return b if self.intercept else b[..., 1:]

    def __call__(self, x, nu: int = 0) -> np.ndarray:
        """Basis matrix (``len(x)`` x ``df``), or its ``nu``-th derivative."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        lo, hi = self.boundary
        inside = np.clip(x, lo, hi)
        out = self._raw(inside, nu) @ self._proj
        below, above = x < lo, x > hi
        if below.any() or above.any():
            d1 = self._raw(np.array([lo, hi]), 1) @ self._proj
            if nu == 0:
                v = self._raw(np.array([lo, hi])) @ self._proj
                out[below] = v[0] + (x[below] - lo)[:, None] * d1[0]
                out[above] = v[1] + (x[above] - hi)[:, None] * d1[1]
            elif nu == 1:
                out[below] = d1[0]
                out[above] = d1[1]
            else:
                out[below | above] = 0.0
        return out


def ncs_basis(values, knots, intercept: bool = False) -> np.ndarray:
    """Evaluate a natural cubic spline basis at ``values``."""
    return NaturalCubicBasis(knots, intercept)(values)


def exposure_knots(values, df: int) -> np.ndarray:
    """``df - 1`` interior knots at equally spaced quantiles plus min/max."""
    if df < 2:
        raise InputError("exposure df must be >= 2")
    v = np.asarray(values, dtype=float)
    probs = np.linspace(0.0, 1.0, df + 1)
    k = np.quantile(v, probs)
    if np.any(np.diff(k) <= 0):
        raise InputError("exposure values too concentrated to place distinct knots")
    return k


def lag_knots(lag_max: int, df: int) -> np.ndarray:
    """``df`` knots equally spaced on the log(1 + lag) scale over [0, lag_max]."""
    if df < 2:
        raise InputError("lag df must be >= 2")
    top = max(lag_max, 1)
    return np.expm1(np.linspace(0.0, np.log1p(top), df))


@dataclass(frozen=True, eq=False)
class CrossBasis:
    """Weekly design: cross-basis columns, then HWD, CWD and an intercept."""

    matrix: np.ndarray
    columns: list
    exposure_basis: NaturalCubicBasis
    lag_basis: NaturalCubicBasis
    lag_max: int

    @property
    def n_cross(self) -> int:
        return self.exposure_basis.df * self.lag_basis.df


def cross_columns(n_exp: int, n_lag: int) -> list[str]:
    cols = [f"cb_e{k + 1}_l{m + 1}" for k in range(n_exp) for m in range(n_lag)]
    return cols + ["hwd", "cwd", "intercept"]


def tensor_rows(exposures: np.ndarray, exposure_basis, lag_matrix: np.ndarray) -> np.ndarray:
    """Sum over lags of exposure-basis (x) lag-basis, one row per exposure history.

    ``exposures`` is (rows, L+1) with column ``l`` holding the value at lag
    ``l``; ``lag_matrix`` is the lag basis evaluated at 0..L.
    """
    n, nl = exposures.shape
    e = exposure_basis(exposures.ravel()).reshape(n, nl, -1)
    return np.einsum("tlk,lm->tkm", e, lag_matrix).reshape(n, -1)


class CrossBasisTransformer(TransformerMixin, BaseEstimator):
    """Turn a daily climate series into the weekly DLNM design matrix.

    ``fit`` places knots (exposure quantiles of the training series' daily
    mean, log-spaced lag knots); ``transform`` builds one row per week.

    Parameters
    ----------
    lag_max : int
        Maximum lag in days.
    exposure_df, lag_df : int
        Dimensions of the exposure and lag bases.
    exposure_knots, lag_knots : array-like, optional
        Fixed knot vectors overriding the default placement.
    """

    def __init__(self, lag_max=21, exposure_df=4, lag_df=4, exposure_knots=None, lag_knots=None):
        self.lag_max = lag_max
        self.exposure_df = exposure_df
        self.lag_df = lag_df
        self.exposure_knots = exposure_knots
        self.lag_knots = lag_knots

    def fit(self, X: DailyClimateSeries, y=None):
        if not isinstance(X, DailyClimateSeries):
            raise InputError("CrossBasisTransformer expects a DailyClimateSeries")
        if self.lag_max < 0:
            raise InputError("lag_max must be non-negative")
        ek = self.exposure_knots
        if ek is None:
            ek = exposure_knots(X.mean, self.exposure_df)
        lk = self.lag_knots if self.lag_knots is not None else lag_knots(self.lag_max, self.lag_df)
        self.exposure_basis_ = NaturalCubicBasis(ek, intercept=False)
        self.lag_basis_ = NaturalCubicBasis(lk, intercept=True)
        self.lag_matrix_ = self.lag_basis_(np.arange(self.lag_max + 1))
        self.columns_ = cross_columns(self.exposure_basis_.df, self.lag_basis_.df)
        self.n_features_out_ = len(self.columns_)
        return self

    def transform(self, X: DailyClimateSeries, weeks=None) -> np.ndarray:
        check_is_fitted(self, "exposure_basis_")
        weeks = np.arange(1, X.n_weeks + 1) if weeks is None else np.asarray(weeks)
        lagged = X.lag_matrix(self.lag_max, weeks)
        cb = tensor_rows(lagged, self.exposure_basis_, self.lag_matrix_)
        wc = wave_counts(X, weeks)
        return np.column_stack([cb, wc.hwd, wc.cwd, np.ones(len(weeks))])

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "columns_")
        return np.asarray(self.columns_, dtype=object)

    def to_cross_basis(self, X: DailyClimateSeries, weeks=None) -> CrossBasis:
        return CrossBasis(self.transform(X, weeks), list(self.columns_),
                          self.exposure_basis_, self.lag_basis_, self.lag_max)


def build_cross_basis(climate: DailyClimateSeries, weeks=None, lag_max: int = 21,
                      exposure_df: int = 4, lag_df: int = 4) -> CrossBasis:
    """Fit knots on ``climate`` and build the design for ``weeks``."""
    tr = CrossBasisTransformer(lag_max, exposure_df, lag_df).fit(climate)
    return tr.to_cross_basis(climate, weeks)
