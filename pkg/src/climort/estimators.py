"""Estimator front-ends for the climate-driven mortality models.

``DlnmLeeCarter`` fits one backfit per region; ``DlnmLiLee`` fits all
regions jointly. With ``use_climate=False`` either estimator reduces to the
plain stochastic model (the cross-validation baseline).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.exceptions import NotFittedError

from .backfit import backfit_lc, backfit_ll
from .data import DailyClimateSeries, MortalityPanel
from .dlnm import DlnmFit
from .exceptions import ConfigError, InputError
from .forecast import climate_loading, fit_index_model
from .lee_carter import fit_lc
from .li_lee import fit_ll
from .splines import CrossBasisTransformer


def _validate_int(name, value, lo):
    if not isinstance(value, (int, np.integer)) or isinstance(value, bool) or value < lo:
        raise ConfigError(f"{name} must be an integer >= {lo}, got {value!r}")


def _validate_rates(y, min_regions=1):
    """Return (log rates (age, time, region), ages, regions, first_year)."""
    if isinstance(y, MortalityPanel):
        return y.log_rates, tuple(y.ages), tuple(y.regions), y.first_year
    r = np.asarray(y, dtype=float)
    if r.ndim == 2:
        r = r[:, :, None]
    if r.ndim != 3:
        raise InputError(f"rates must be (age, time) or (age, time, region), got shape {r.shape}")
    if not np.all(np.isfinite(r)) or np.any(r <= 0):
        raise InputError("rates must be finite and positive")
    ages = tuple(str(k) for k in range(r.shape[0]))
    regions = tuple(str(k) for k in range(r.shape[2]))
    return np.log(r), ages, regions, None


class _BaseMortalityModel(RegressorMixin, BaseEstimator):
    """Shared fitting, prediction and projection plumbing."""

    _variant = None

    def __init__(self, lag_max=21, exposure_df=4, lag_df=4, tol=1e-2, max_iter=20,
                 use_climate=True, max_ar=3, seasonal=True, first_year=2016):
        self.lag_max = lag_max
        self.exposure_df = exposure_df
        self.lag_df = lag_df
        self.tol = tol
        self.max_iter = max_iter
        self.use_climate = use_climate
        self.max_ar = max_ar
        self.seasonal = seasonal
        self.first_year = first_year

    # validation -----------------------------------------------------------
    def _validate_params(self):
        _validate_int("lag_max", self.lag_max, 0)
        _validate_int("exposure_df", self.exposure_df, 2)
        _validate_int("lag_df", self.lag_df, 2)
        _validate_int("max_iter", self.max_iter, 1)
        _validate_int("max_ar", self.max_ar, 0)
        if not (isinstance(self.tol, (int, float)) and self.tol > 0):
            raise ConfigError(f"tol must be positive, got {self.tol!r}")

    def _check_fitted(self):
        if not hasattr(self, "params_"):
            raise NotFittedError(f"{type(self).__name__} is not fitted yet")

    def _as_climate_list(self, X, n=None):
        n = self.n_regions_ if n is None else n
        if isinstance(X, DailyClimateSeries):
            X = [X]
        X = list(X)
        if len(X) != n or not all(isinstance(c, DailyClimateSeries) for c in X):
            raise InputError(f"expected {n} DailyClimateSeries (one per region), got {len(X)}")
        return X

    # fitting --------------------------------------------------------------
    def fit(self, X, y):
        """Fit the model.

        Parameters
        ----------
        X : DailyClimateSeries or list of DailyClimateSeries
            Daily UTCI per region covering the training weeks plus the lag
            padding. Ignored when ``use_climate`` is False (may be None).
        y : MortalityPanel or ndarray
            Panel, or weekly rates shaped (age, time) or (age, time, region).
        """
        self._validate_params()
        logm, ages, regions, first_year = _validate_rates(y)
        self.ages_, self.regions_ = ages, regions
        self.first_year_ = self.first_year if first_year is None else first_year
        self.n_ages_, self.n_train_weeks_, self.n_regions_ = logm.shape
        if self._variant == "dlnm-ll" and self.n_regions_ < 2:
            raise ConfigError("the Li-Lee variant needs at least two regions")

        if self.use_climate:
            climate = self._as_climate_list(X)
            self.transformers_ = []
            designs = []
            for c in climate:
                if c.n_weeks < self.n_train_weeks_:
                    raise InputError(f"climate covers {c.n_weeks} weeks, panel has {self.n_train_weeks_}")
                tr = CrossBasisTransformer(self.lag_max, self.exposure_df, self.lag_df).fit(c)
                self.transformers_.append(tr)
                designs.append(tr.to_cross_basis(c, np.arange(1, self.n_train_weeks_ + 1)))
            self.backfit_ = self._backfit(logm, designs)
            fitted = self._absorb_backfit()
        else:
            self.backfit_ = None
            self.params_, fitted = self._fit_stochastic(logm)
            self.climate_component_ = np.zeros_like(logm)
            resid = logm - fitted
            self.residual_variance_ = resid.var(axis=1, ddof=1)
        self.fitted_log_rates_ = fitted
        self.index_models_ = {name: fit_index_model(series, self.seasonal, self.max_ar)
                              for name, series in self._indices().items()}
        return self

    # prediction -----------------------------------------------------------
    def design_rows(self, X):
        """Scenario design matrices, one (weeks, p) array per region."""
        self._check_fitted()
        climate = self._as_climate_list(X)
        if not self.use_climate:
            return [np.zeros((c.n_weeks, 1)) for c in climate]
        return [tr.transform(c) for tr, c in zip(self.transformers_, climate)]

    def cell_fit(self, age: int, region: int) -> DlnmFit:
        self._check_fitted()
        if self.backfit_ is None:
            z = np.zeros(1)
            return DlnmFit(z, np.zeros((1, 1)), 0.0, self.n_train_weeks_)
        if self._variant == "dlnm-lc":
            return self.backfit_[region].cell_fit(age, 0)
        return self.backfit_.cell_fit(age, region)

    def predict_log(self, X, offset: int = 0, horizon: int | None = None) -> np.ndarray:
        """Point forecast of log rates, shape (age, weeks, region).

        ``X`` is the climate over the forecast weeks (renumbered from 1 with
        its own padding); ``offset`` weeks separate the last training week
        from the first forecast week. Without climate, pass ``horizon``.
        """
        self._check_fitted()
        if self.use_climate:
            designs = self.design_rows(X)
            h = designs[0].shape[0]
        else:
            if horizon is None:
                h = self._as_climate_list(X)[0].n_weeks
            else:
                h = int(horizon)
            designs = [np.zeros((h, 1))] * self.n_regions_
        if h < 1:
            raise InputError("nothing to forecast")
        idx = {n: m.point_forecast(offset + h)[offset:] for n, m in self.index_models_.items()}
        out = np.empty((self.n_ages_, h, self.n_regions_))
        for i in range(self.n_regions_):
            level, terms = self.stochastic_terms(i)
            for x in range(self.n_ages_):
                val = level[x] + designs[i] @ self.cell_fit(x, i).coef
                for loading, name in terms:
                    val = val + loading[x] * idx[name]
                out[x, :, i] = val
        return out

    def predict(self, X, offset: int = 0, horizon: int | None = None) -> np.ndarray:
        """Point forecast of weekly rates, shape (age, weeks, region)."""
        return np.exp(self.predict_log(X, offset, horizon))

    def climate_loading(self):
        return climate_loading(self)


class DlnmLeeCarter(_BaseMortalityModel):
    """DLNM plus Lee-Carter, fitted separately for each region.

    Parameters
    ----------
    lag_max : int
        Maximum lag in days of the cross-basis.
    exposure_df, lag_df : int
        Spline dimensions of the exposure and lag bases.
    tol, max_iter : float, int
        Backfitting stopping rule.
    use_climate : bool
        If False, fit plain Lee-Carter (the baseline).
    max_ar : int
        Largest AR order considered for the index models.
    seasonal : bool
        Whether index models may include a lag-52 term.
    first_year : int
        Calendar year of week 1 when ``y`` is a bare array.
    """

    _variant = "dlnm-lc"

    def _backfit(self, logm, designs):
        return [backfit_lc(logm[:, :, i], d, self.tol, self.max_iter) for i, d in enumerate(designs)]

    def _fit_stochastic(self, logm):
        params, fitted = [], np.empty_like(logm)
        for i in range(logm.shape[2]):
            p, f = fit_lc(logm[:, :, i])
            params.append(p)
            fitted[:, :, i] = f
        return params, fitted

    def _absorb_backfit(self):
        self.params_ = [m.params for m in self.backfit_]
        self.climate_component_ = np.concatenate([m.climate_component() for m in self.backfit_], axis=2)
        self.residual_variance_ = np.concatenate([m.residual_variance() for m in self.backfit_], axis=1)
        return np.concatenate([m.fitted() for m in self.backfit_], axis=2)

    def _indices(self):
        return {f"kappa[{r}]": p.kappa for r, p in zip(self.regions_, self.params_)}

    def stochastic_terms(self, region: int):
        p = self.params_[region]
        return p.a, [(p.b, f"kappa[{self.regions_[region]}]")]

    @property
    def n_iter_(self):
        self._check_fitted()
        return [m.n_iter for m in self.backfit_] if self.backfit_ else []


class DlnmLiLee(_BaseMortalityModel):
    """DLNM plus Li-Lee, fitted jointly over at least two regions.

    Parameters are as for :class:`DlnmLeeCarter`.
    """

    _variant = "dlnm-ll"

    def _backfit(self, logm, designs):
        return backfit_ll(logm, designs, self.tol, self.max_iter)

    def _fit_stochastic(self, logm):
        return fit_ll(logm)

    def _absorb_backfit(self):
        m = self.backfit_
        self.params_ = m.params
        self.climate_component_ = m.climate_component()
        self.residual_variance_ = m.residual_variance()
        return m.fitted()

    def _indices(self):
        out = {"K": self.params_.K}
        out.update({f"kappa[{r}]": self.params_.kappa[:, i] for i, r in enumerate(self.regions_)})
        return out

    def stochastic_terms(self, region: int):
        p = self.params_
        r = self.regions_[region]
        return p.A[:, region], [(p.B, "K"), (p.b[:, region], f"kappa[{r}]")]

    @property
    def n_iter_(self):
        self._check_fitted()
        return [self.backfit_.n_iter] if self.backfit_ else []


VARIANT_CLASSES = {"lc": DlnmLeeCarter, "ll": DlnmLiLee}


def make_model(variant: str, **params):
    """Estimator for ``variant`` in {"lc", "ll"}."""
    try:
        cls = VARIANT_CLASSES[variant]
    except KeyError:
        raise ConfigError(f"unknown variant {variant!r}; expected one of {sorted(VARIANT_CLASSES)}") from None
    return cls(**params)
