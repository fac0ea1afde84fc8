"""Index time-series models, Monte Carlo projection and climate loadings."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .data import WEEKS_PER_YEAR
from .dlnm import bootstrap_coeffs
from .exceptions import DegenerateSeriesError, InputError, ModelError

SEASONAL_LAG = WEEKS_PER_YEAR
MIN_INDEX_LENGTH = 60


@dataclass(frozen=True)
class IndexModel:
    """Drifting random walk with optional AR terms on the weekly differences.

    ``y_t = d + sum_l phi_l (y_{t-l} - d) + e_t`` with ``y_t = k_t - k_{t-1}``
    and ``e_t ~ N(0, sigma2)``. ``history`` holds the most recent
    differences (oldest first) and ``last`` the last observed level.
    """

    drift: float
    sigma2: float
    last: float
    lags: tuple = ()
    phi: tuple = ()
    history: np.ndarray = field(default_factory=lambda: np.zeros(0))
    drift_se: float = float("nan")
    n_obs: int = 0
    selection: dict = field(default_factory=dict)
    fallback: bool = False

    @property
    def name(self) -> str:
        if not self.lags:
            return "rw-drift"
        ar = [l for l in self.lags if l != SEASONAL_LAG]
        parts = [f"ar{max(ar)}"] if ar else []
        if SEASONAL_LAG in self.lags:
            parts.append(f"sar{SEASONAL_LAG}")
        return "drift+" + "+".join(parts)

    def point_forecast(self, horizon: int) -> np.ndarray:
        return simulate_paths(self, horizon, 1, noise=False)[:, 0]


def _candidates(n_diff):
    out = [(p, False) for p in range(4)]
    if n_diff - SEASONAL_LAG >= 20:
        out += [(p, True) for p in range(4)]
    return out


def _lag_list(p, seasonal):
    return tuple(range(1, p + 1)) + ((SEASONAL_LAG,) if seasonal else ())


def _stationary(lags, phi):
    if not lags:
        return True
    poly = np.zeros(max(lags) + 1)
    poly[0] = 1.0
    for l, c in zip(lags, phi):
        poly[l] -= c
    roots = np.roots(poly[::-1])
    return bool(np.all(np.abs(roots) > 1.0 + 1e-8))


def _fit_candidate(y, lags, start):
    rows = np.arange(start, y.size)
    Z = np.column_stack([np.ones(rows.size)] + [y[rows - l] for l in lags])
    target = y[rows]
    coef, *_ = np.linalg.lstsq(Z, target, rcond=None)
    resid = target - Z @ coef
    n = rows.size
    rss = float(resid @ resid)
    k = Z.shape[1] + 1
    if rss <= 0 or not np.isfinite(rss):
        return None
    loglik = -0.5 * n * (np.log(2 * np.pi * rss / n) + 1)
    aicc = -2 * loglik + 2 * k + 2 * k * (k + 1) / max(n - k - 1, 1)
    phi = coef[1:]
    s = 1.0 - phi.sum()
    if abs(s) < 1e-8:
        return None
    sigma2 = rss / max(n - Z.shape[1], 1)
    return dict(drift=float(coef[0] / s), phi=tuple(float(c) for c in phi), sigma2=sigma2,
                aicc=float(aicc), drift_se=float(np.sqrt(sigma2 / n) / abs(s)))


def fit_index_model(index, seasonal: bool = True, max_ar: int = 3) -> IndexModel:
    """Select a drift model for a mortality index by AICc.

    Candidates are the drifting random walk, drift plus AR(p) on the weekly
    differences for p <= ``max_ar``, and the same with an additional lag-52
    term. All candidates are scored on a common sample so their AICc values
    are comparable; non-stationary fits are discarded.
    """
    k = np.asarray(index, dtype=float)
    if k.ndim != 1 or k.size < 2:
        raise InputError("index must be a 1-D series")
    if not np.all(np.isfinite(k)):
        raise InputError("index contains non-finite values")
    y = np.diff(k)
    if np.ptp(y) <= 1e-12 * max(1.0, float(np.abs(y).max())):
        raise DegenerateSeriesError("index is constant or linear; innovation variance would be zero")
    cands = [(p, s) for p, s in _candidates(y.size) if p <= max_ar and (seasonal or not s)]
    if k.size < MIN_INDEX_LENGTH:
        cands = [(0, False)]
    start = max(max(_lag_list(p, s), default=0) for p, s in cands)
    scores, best, best_key = {}, None, None
    for p, s in cands:
        lags = _lag_list(p, s)
        res = _fit_candidate(y, lags, start)
        if res is None or not _stationary(lags, res["phi"]):
            continue
        scores[lags] = res["aicc"]
        if best is None or res["aicc"] < best["aicc"]:
            best, best_key = res, lags
    fallback = False
    if best is None:
        fallback = True
        sigma2 = float(np.var(y, ddof=1)) if y.size > 1 else 0.0
        if not sigma2 > 0:
            raise DegenerateSeriesError("index differences have zero variance")
        best = dict(drift=float(y.mean()), phi=(), sigma2=sigma2,
                    drift_se=float(np.sqrt(sigma2 / y.size)))
        best_key = ()
    hist_len = max(best_key, default=0)
    return IndexModel(
        drift=best["drift"], sigma2=best["sigma2"], last=float(k[-1]), lags=best_key,
        phi=best["phi"], history=y[y.size - hist_len:].copy() if hist_len else np.zeros(0),
        drift_se=best["drift_se"], n_obs=int(y.size - start),
        selection={"+".join(map(str, key)) or "rw": v for key, v in scores.items()},
        fallback=fallback,
    )


def simulate_paths(model: IndexModel, horizon: int, n_paths: int, seed=None,
                   noise: bool = True) -> np.ndarray:
    """Simulate future index levels, shape (horizon, n_paths).

    With ``noise=False`` (or zero innovation variance) every path is the
    conditional-mean forecast.
    """
    if horizon < 1:
        raise InputError("horizon must be >= 1")
    if n_paths < 1:
        raise InputError("n_paths must be >= 1")
    rng = np.random.default_rng(seed)
    sd = np.sqrt(model.sigma2) if noise else 0.0
    lags = model.lags
    if not lags:
        steps = np.full((horizon, n_paths), model.drift)
        if sd > 0:
            steps = steps + sd * rng.standard_normal((horizon, n_paths))
        return model.last + np.cumsum(steps, axis=0)
    m = max(lags)
    buf = np.empty((m + horizon, n_paths))
    buf[:m] = (np.asarray(model.history, float) - model.drift)[:, None]
    phi = np.asarray(model.phi)
    for h in range(horizon):
        t = m + h
        val = sum(c * buf[t - l] for l, c in zip(lags, phi))
        if sd > 0:
            val = val + sd * rng.standard_normal(n_paths)
        buf[t] = val
    return model.last + np.cumsum(buf[m:] + model.drift, axis=0)


def year_week_labels(n_weeks: int, first_year: int, first_week: int = 1):
    out = []
    for k in range(n_weeks):
        w = k + first_week - 1
        out.append((first_year + w // WEEKS_PER_YEAR, w % WEEKS_PER_YEAR + 1))
    return out


@dataclass(frozen=True, eq=False)
class ProjectionFan:
    """Simulated weekly rates summarised per (age, week, region)."""

    mean: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    log_mean: np.ndarray
    log_sd: np.ndarray
    point: np.ndarray
    n_paths: int
    seed: object
    ages: tuple = ()
    regions: tuple = ()
    weeks: list = field(default_factory=list)
    annual: dict | None = None

    def to_frame(self) -> pd.DataFrame:
        recs = []
        for i, r in enumerate(self.regions):
            for x, a in enumerate(self.ages):
                for k, (y, w) in enumerate(self.weeks):
                    recs.append((r, a, y, w, self.mean[x, k, i], self.lo[x, k, i], self.hi[x, k, i]))
        return pd.DataFrame(recs, columns=["region", "age_group", "year", "week", "mean", "p2.5", "p97.5"])

    def annual_frame(self) -> pd.DataFrame:
        if self.annual is None:
            raise InputError("projection was run without annual aggregation")
        recs = []
        years = self.annual["years"]
        for i, r in enumerate(self.regions):
            for x, a in enumerate(self.ages):
                for k, y in enumerate(years):
                    recs.append((r, a, y, self.annual["mean"][x, k, i],
                                 self.annual["lo"][x, k, i], self.annual["hi"][x, k, i]))
        return pd.DataFrame(recs, columns=["region", "age_group", "year", "mean", "p2.5", "p97.5"])


def annualize(rates, axis: int = -2) -> np.ndarray:
    """Annual rates as the sum of 52 weekly rates divided by 52.

    ``axis`` is the week axis; its length must be a multiple of 52. Apply to
    per-path arrays before taking percentiles.
    """
    r = np.moveaxis(np.asarray(rates, dtype=float), axis, -1)
    n = r.shape[-1]
    if n % WEEKS_PER_YEAR:
        raise InputError(f"{n} weeks is not a whole number of 52-week years")
    r = r.reshape(r.shape[:-1] + (n // WEEKS_PER_YEAR, WEEKS_PER_YEAR)).sum(axis=-1) / WEEKS_PER_YEAR
    return np.moveaxis(r, -1, axis)


def project(model, scenario, n_paths: int = 10_000, seed=None, offset: int = 0,
            index_noise: bool = True, coef_noise: bool = True, obs_noise: bool = True,
            annual: bool = False, first_year: int | None = None,
            quantiles=(2.5, 97.5), n_boot: int | None = None) -> ProjectionFan:
    """Monte Carlo projection of weekly mortality under a climate scenario.

    Each path combines a simulated index trajectory, a bootstrap draw of
    each cell's DLNM coefficients, the scenario design rows and Gaussian
    log-scale observation error with the in-sample residual variance.

    ``model`` is a fitted :class:`~climort.estimators.DlnmLeeCarter` or
    :class:`~climort.estimators.DlnmLiLee`; ``scenario`` is one climate
    series per region in the model's region order. ``offset`` weeks
    separate the end of the fitted sample from the first scenario week.
    Week labels continue the training calendar unless ``first_year`` is
    given, in which case the scenario starts at week 1 of that year.
    ``n_boot`` coefficient draws (default one per path) are cycled over
    the paths.
    """
    if n_paths < 1:
        raise InputError("n_paths must be >= 1")
    n_boot = n_paths if n_boot is None else int(n_boot)
    if n_boot < 1:
        raise InputError("n_boot must be >= 1")
    model._check_fitted()
    scen = model._as_climate_list(scenario)
    designs = model.design_rows(scen)
    horizon = designs[0].shape[0]
    if any(d.shape[0] != horizon for d in designs):
        raise InputError("scenario series cover different numbers of weeks")
    n_age, n_reg = model.n_ages_, model.n_regions_

    ss = np.random.SeedSequence(seed)
    names = sorted(model.index_models_)
    idx_seeds = dict(zip(names, ss.spawn(len(names))))
    cell_seeds = ss.spawn(n_age * n_reg)

    total = offset + horizon
    paths = {}
    for name in names:
        sim = simulate_paths(model.index_models_[name], total, n_paths, idx_seeds[name], noise=index_noise)
        paths[name] = sim[offset:]

    point_idx = {n: model.index_models_[n].point_forecast(total)[offset:] for n in names}
    sigma2 = model.residual_variance_

    mean = np.empty((n_age, horizon, n_reg))
    lo, hi, lmean, lsd, point = (np.empty_like(mean) for _ in range(5))
    ann = None
    if annual:
        if horizon % WEEKS_PER_YEAR:
            raise InputError("annual aggregation needs whole 52-week years")
        ny = horizon // WEEKS_PER_YEAR
        ann = {k: np.empty((n_age, ny, n_reg)) for k in ("mean", "lo", "hi")}

    for i in range(n_reg):
        level, terms = model.stochastic_terms(i)
        for x in range(n_age):
            rng = np.random.default_rng(cell_seeds[x * n_reg + i])
            fit = model.cell_fit(x, i)
            clim_point = designs[i] @ fit.coef
            if coef_noise:
                draws = bootstrap_coeffs(fit, min(n_boot, n_paths), rng)
                clim = (designs[i] @ draws.T)[:, np.arange(n_paths) % draws.shape[0]]
            else:
                clim = np.repeat(clim_point[:, None], n_paths, axis=1)
            logp = clim + level[x]
            pt = clim_point + level[x]
            for loading, name in terms:
                logp += loading[x] * paths[name]
                pt = pt + loading[x] * point_idx[name]
            if obs_noise and sigma2[x, i] > 0:
                logp += np.sqrt(sigma2[x, i]) * rng.standard_normal(logp.shape)
            rates = np.exp(logp)
            mean[x, :, i] = rates.mean(axis=1)
            q = np.percentile(rates, quantiles, axis=1)
            lo[x, :, i], hi[x, :, i] = q[0], q[1]
            lmean[x, :, i] = logp.mean(axis=1)
            lsd[x, :, i] = logp.std(axis=1, ddof=1) if n_paths > 1 else 0.0
            point[x, :, i] = np.exp(pt)
            if ann is not None:
                yr = annualize(rates, axis=0)
                ann["mean"][x, :, i] = yr.mean(axis=1)
                qa = np.percentile(yr, quantiles, axis=1)
                ann["lo"][x, :, i], ann["hi"][x, :, i] = qa[0], qa[1]

    start = model.n_train_weeks_ + offset
    if first_year is None:
        weeks = year_week_labels(horizon, model.first_year_, start + 1)
    else:
        weeks = year_week_labels(horizon, first_year)
    if ann is not None:
        ann["years"] = sorted({y for y, _ in weeks})[: horizon // WEEKS_PER_YEAR]
    return ProjectionFan(mean, lo, hi, lmean, lsd, point, n_paths, seed,
                         tuple(model.ages_), tuple(model.regions_), weeks, ann)


@dataclass(frozen=True, eq=False)
class ClimateLoadingSeries:
    """Weekly climate loadings ``theta = 1 - exp(-S)`` and their annual sums."""

    theta: np.ndarray            # (age, week, region)
    annual: np.ndarray           # (age, year, region)
    ages: tuple = ()
    regions: tuple = ()
    weeks: list = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        recs = []
        for i, r in enumerate(self.regions):
            for x, a in enumerate(self.ages):
                for k, (y, w) in enumerate(self.weeks):
                    recs.append((r, a, y, w, self.theta[x, k, i]))
        return pd.DataFrame(recs, columns=["region", "age_group", "year", "week", "theta"])


def loading_from_component(S) -> np.ndarray:
    """``1 - m_stochastic / m_total`` given the log-scale climate component S."""
    return -np.expm1(-np.asarray(S, dtype=float))


def climate_loading(model) -> ClimateLoadingSeries:
    """In-sample climate loadings of a fitted climate model.

    The annualised loading is the sum of the weekly loadings of each
    complete 52-week year.
    """
    model._check_fitted()
    S = model.climate_component_
    theta = loading_from_component(S)
    n_years = theta.shape[1] // WEEKS_PER_YEAR
    annual = theta[:, : n_years * WEEKS_PER_YEAR].reshape(
        theta.shape[0], n_years, WEEKS_PER_YEAR, theta.shape[2]).sum(axis=2)
    weeks = year_week_labels(theta.shape[1], model.first_year_)
    return ClimateLoadingSeries(theta, annual, tuple(model.ages_), tuple(model.regions_), weeks)
