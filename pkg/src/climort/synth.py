"""Synthetic panels with planted mortality trends and climate effects.

The generator draws seasonal daily UTCI per region, builds the weekly DLNM
design, and plants

* Lee-Carter (or Li-Lee) stochastic structure whose indices are
  orthogonal to each region's design, and
* a U-shaped exposure-lag surface (minimum near 21 C, heat acting at short
  lags, cold peaking around a week) plus heatwave/coldwave effects,

then adds Gaussian noise on the log scale. The index orthogonality and the
zero-mean climate component are the identifying constraints the backfit
itself imposes, so planted and estimated parameters are directly comparable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .data import DAYS_PER_WEEK, WEEKS_PER_YEAR, DailyClimateSeries, MortalityPanel, required_padding
from .exceptions import ConfigError
from .splines import CrossBasisTransformer

DEFAULT_AGES = ("20-64", "65-74", "75-84", "85+")
BASE_RATES = (0.003, 0.015, 0.045, 0.14)
POPULATION = (2.0e7, 5.0e6, 3.0e6, 1.5e6)
SENSITIVITY = (0.4, 0.7, 1.0, 1.4)
OPTIMUM_UTCI = 21.0


@dataclass
class SynthConfig:
    """Generator settings; defaults give a 4 x 260 x 3 panel."""

    n_regions: int = 3
    n_weeks: int = 260
    first_year: int = 2016
    ages: tuple = DEFAULT_AGES
    noise_sd: float = 0.02
    structure: str = "lc"
    drift: float = -0.008
    rw_sd: float = 0.025
    heat_scale: float = 1.9e-4
    cold_scale: float = 3.0e-5
    hwd_effect: float = 0.01
    cwd_effect: float = 0.008
    climate_scale: float = 1.0
    lag_max: int = 21
    exposure_df: int = 4
    lag_df: int = 4
    region_offsets: tuple = (0.0, -3.0, 3.0)
    seed: int = 0
    round_deaths: bool = True

    def validate(self):
        if self.n_regions < 1 or self.n_weeks < WEEKS_PER_YEAR:
            raise ConfigError("synthetic panel needs >= 1 region and >= 52 weeks")
        if self.structure not in ("lc", "ll"):
            raise ConfigError(f"structure must be 'lc' or 'll', got {self.structure!r}")
        if self.structure == "ll" and self.n_regions < 2:
            raise ConfigError("Li-Lee structure needs at least two regions")
        if self.noise_sd < 0:
            raise ConfigError("noise_sd must be >= 0")
        if len(self.ages) != len(BASE_RATES):
            raise ConfigError(f"generator is calibrated for {len(BASE_RATES)} age groups")


@dataclass(frozen=True, eq=False)
class SyntheticData:
    """Generated panel, climate and ground truth."""

    panel: MortalityPanel
    climate: list
    log_rates: np.ndarray           # noisy log rates used to derive deaths
    designs: list                   # per-region planted design matrices
    zeta: np.ndarray                # (age, region, p) planted coefficients
    climate_component: np.ndarray   # (age, time, region)
    a: np.ndarray                   # (age, region)
    b: np.ndarray                   # (age, region)
    kappa: np.ndarray               # (time, region)
    config: SynthConfig
    transformers: list = field(default_factory=list)
    common: dict | None = None

    @property
    def rates(self) -> np.ndarray:
        return np.exp(self.log_rates)


def planted_surface(u, lag, sensitivity: float = 1.0, heat_scale: float = 1.9e-4,
                    cold_scale: float = 3.0e-5):
    """Daily log-RR contribution ``f(u, lag)`` of the planted U-shape."""
    u = np.asarray(u, float)[..., None]
    lag = np.asarray(lag, float)
    heat = heat_scale * np.clip(u - OPTIMUM_UTCI, 0, None) ** 2 * np.exp(-lag / 2.5)
    cold = cold_scale * np.clip(OPTIMUM_UTCI - u, 0, None) ** 2 * np.exp(-((lag - 7.0) ** 2) / 18.0)
    return sensitivity * (heat + cold)


def surface_coefficients(transformer, sensitivity, heat_scale, cold_scale) -> np.ndarray:
    """Least-squares projection of the planted surface onto the cross-basis block.

    The exposure basis vanishes at the lower knot, so the surface is taken
    relative to its value there; the remainder is constant across weeks and
    lives in the intercept.
    """
    lo, hi = transformer.exposure_basis_.boundary
    grid = np.linspace(lo, hi, 200)
    lags = np.arange(transformer.lag_max + 1)
    f = planted_surface(grid, lags, sensitivity, heat_scale, cold_scale)
    f = f - planted_surface(np.array([lo]), lags, sensitivity, heat_scale, cold_scale)
    be = transformer.exposure_basis_(grid)
    bl = transformer.lag_matrix_
    design = np.einsum("gk,lm->glkm", be, bl).reshape(grid.size * lags.size, -1)
    coef, *_ = np.linalg.lstsq(design, f.ravel(), rcond=None)
    return coef


def synthetic_climate(n_weeks: int, pad: int, offset: float, rng, scale: float = 1.0,
                      first_year: int = 2016, region: str | None = None,
                      start_day: int = 0, warming: float = 0.0) -> DailyClimateSeries:
    """Seasonal daily UTCI with persistent anomalies.

    Mean UTCI follows an annual cycle (about -2 C in winter to 26 C in
    summer) plus AR(1) anomalies; daily minima and maxima spread around it
    so that runs of strong heat and cold stress occur. Day 1 is ``start_day``
    days after the Monday of ISO week 1 of ``first_year``; ``warming`` adds
    a linear ramp reaching that many degrees on the last day.
    """
    n = DAYS_PER_WEEK * n_weeks + pad
    day = np.arange(n) - pad + start_day
    season = 12.0 + 14.0 * scale * np.sin(2 * np.pi * (day - 110) / 365.25)
    z = rng.standard_normal(n)
    anom = np.empty(n)
    anom[0] = z[0] * 4.0
    for k in range(1, n):
        anom[k] = 0.7 * anom[k - 1] + np.sqrt(1 - 0.49) * 4.0 * z[k]
    mean = season + anom + offset + warming * np.clip(np.arange(n) - pad + 1, 0, None) / (n - pad)
    spread = 4.0 + 2.0 * np.abs(rng.standard_normal(n))
    lo = mean - spread - 2.0
    hi = mean + spread + 1.0 + 2.0 * np.clip(mean - 15.0, 0, None) / 10.0
    start = np.datetime64(pd.Timestamp.fromisocalendar(first_year, 1, 1).date())
    dates = start + (day).astype("timedelta64[D]")
    return DailyClimateSeries(mean, lo, hi, pad, region, dates)


def _orthogonal_walk(rng, T, drift, sd, Q):
    k = np.cumsum(drift + sd * rng.standard_normal(T))
    return k - Q @ (Q.T @ k)


def generate(config: SynthConfig | None = None, **overrides) -> SyntheticData:
    """Draw a synthetic dataset; keyword overrides patch ``config`` fields."""
    cfg = SynthConfig(**{**(config.__dict__ if config else {}), **overrides})
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    T, n, N = cfg.n_weeks, cfg.n_regions, len(cfg.ages)
    pad = required_padding(cfg.lag_max)
    regions = tuple(f"R{i + 1}" for i in range(n))
    offsets = [cfg.region_offsets[i % len(cfg.region_offsets)] for i in range(n)]

    climate, designs, transformers, bases = [], [], [], []
    for i in range(n):
        c = synthetic_climate(T, pad, offsets[i], rng, cfg.climate_scale, cfg.first_year, regions[i])
        tr = CrossBasisTransformer(cfg.lag_max, cfg.exposure_df, cfg.lag_df).fit(c)
        X = tr.transform(c)
        climate.append(c)
        transformers.append(tr)
        designs.append(X)
        q, r = np.linalg.qr(X[:, np.any(X != 0, axis=0)])
        bases.append(q)

    p = designs[0].shape[1]
    n_cross = p - 3
    zeta = np.zeros((N, n, p))
    S = np.zeros((N, T, n))
    for x in range(N):
        s = SENSITIVITY[x]
        for i in range(n):
            z = np.zeros(p)
            z[:n_cross] = surface_coefficients(transformers[i], s, cfg.heat_scale, cfg.cold_scale)
            z[n_cross] = cfg.hwd_effect * s
            z[n_cross + 1] = cfg.cwd_effect * s
            comp = designs[i] @ z
            z[-1] = -comp.mean()
            zeta[x, i] = z
            S[x, :, i] = designs[i] @ z

    base = np.log(np.asarray(BASE_RATES))
    a = np.empty((N, n))
    b = np.empty((N, n))
    kappa = np.empty((T, n))
    common = None
    if cfg.structure == "lc":
        b_star = np.array([0.1, 0.2, 0.3, 0.4])
        for i in range(n):
            kappa[:, i] = _orthogonal_walk(rng, T, cfg.drift, cfg.rw_sd, bases[i])
            a[:, i] = base + 0.05 * rng.standard_normal(N)
            b[:, i] = b_star
        stoch = a[:, None, :] + np.einsum("xi,ti->xti", b, kappa)
    else:
        Q_all, _ = np.linalg.qr(np.column_stack([q for q in bases]))
        B = np.array([0.1, 0.2, 0.3, 0.4])
        K = _orthogonal_walk(rng, T, cfg.drift, cfg.rw_sd, Q_all)
        K -= K.mean()
        A = base[:, None] + 0.05 * rng.standard_normal((N, n))
        for i in range(n):
            basis = np.column_stack([bases[i], K / np.linalg.norm(K)])
            qi, _ = np.linalg.qr(basis)
            kappa[:, i] = _orthogonal_walk(rng, T, 0.0, cfg.rw_sd / 2, qi)
            b[:, i] = rng.dirichlet(np.full(N, 5.0))
        a = A
        stoch = A[:, None, :] + np.outer(B, K)[:, :, None] + np.einsum("xi,ti->xti", b, kappa)
        common = {"B": B, "K": K}

    logm = stoch + S + cfg.noise_sd * rng.standard_normal((N, T, n))

    n_years = (T - 1) // WEEKS_PER_YEAR + 1
    growth = 1.0 + 0.005 * np.arange(n_years)
    pop = np.asarray(POPULATION)[:, None, None] * growth[None, :, None] * np.ones((1, 1, n))
    expo = pop[:, np.arange(T) // WEEKS_PER_YEAR, :] / WEEKS_PER_YEAR
    deaths = np.exp(logm) * expo
    if cfg.round_deaths:
        deaths = np.round(deaths)
    panel = MortalityPanel(tuple(cfg.ages), regions, cfg.first_year, deaths, pop)
    return SyntheticData(panel, climate, logm, designs, zeta, S, a, b, kappa, cfg, transformers, common)


def panel_tables(panel: MortalityPanel) -> tuple[pd.DataFrame, pd.DataFrame]:
    """Long-format deaths and population tables for a panel."""
    labels = panel.week_labels()
    recs = []
    for i, r in enumerate(panel.regions):
        for x, a in enumerate(panel.ages):
            for k, (y, w) in enumerate(labels):
                recs.append((r, a, y, w, panel.deaths[x, k, i]))
    deaths = pd.DataFrame(recs, columns=["region", "age_group", "year", "week", "deaths"])
    recs = []
    for i, r in enumerate(panel.regions):
        for x, a in enumerate(panel.ages):
            for j in range(panel.population.shape[1]):
                recs.append((r, a, panel.first_year + j, panel.population[x, j, i]))
    pop = pd.DataFrame(recs, columns=["region", "age_group", "year", "population"])
    return deaths, pop


def climate_table(climate) -> pd.DataFrame:
    """Daily climate rows ``region,date,utci_mean,utci_min,utci_max``."""
    frames = []
    for c in climate:
        frames.append(pd.DataFrame({
            "region": c.region,
            "date": pd.to_datetime(c.dates).strftime("%Y-%m-%d"),
            "utci_mean": c.mean, "utci_min": c.min, "utci_max": c.max,
        }))
    return pd.concat(frames, ignore_index=True)


def truth_tables(data: SyntheticData) -> dict:
    """Ground-truth parameter blocks as data frames."""
    cfg = data.config
    ages, regions = data.panel.ages, data.panel.regions
    out = {}
    out["a"] = pd.DataFrame(data.a, index=pd.Index(ages, name="age_group"), columns=regions)
    out["b"] = pd.DataFrame(data.b, index=pd.Index(ages, name="age_group"), columns=regions)
    out["kappa"] = pd.DataFrame(data.kappa, columns=regions).rename_axis("week_index")
    cols = list(data.transformers[0].columns_)
    recs = []
    for x, a in enumerate(ages):
        for i, r in enumerate(regions):
            recs.append([r, a] + list(data.zeta[x, i]))
    out["zeta"] = pd.DataFrame(recs, columns=["region", "age_group"] + cols)
    if data.common is not None:
        out["common"] = pd.DataFrame({"B": data.common["B"]}, index=pd.Index(ages, name="age_group"))
        out["K"] = pd.DataFrame({"K": data.common["K"]}).rename_axis("week_index")
    return out
