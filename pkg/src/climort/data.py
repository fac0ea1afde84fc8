"""Core domain types: age groups, week calendar, mortality panel, daily climate."""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .exceptions import InputError

WEEKS_PER_YEAR = 52
DAYS_PER_WEEK = 7
WAVE_LOOKBACK = 2


@dataclass(frozen=True)
class AgeGroup:
    label: str
    index: int


@dataclass(frozen=True)
class WeekIndex:
    """Week ``t`` of the sample; its reference day is the last day of the week."""

    t: int

    def __post_init__(self):
        if self.t < 1:
            raise ValueError(f"week index must be >= 1, got {self.t}")

    @property
    def reference_day(self) -> int:
        return DAYS_PER_WEEK * self.t

    @property
    def year_offset(self) -> int:
        """0-based sample year under the 52-week convention."""
        return (self.t - 1) // WEEKS_PER_YEAR

    @property
    def week_of_year(self) -> int:
        return (self.t - 1) % WEEKS_PER_YEAR + 1


def lag_window(week, lag_max: int, first_day: int | None = None) -> list[int]:
    """Day indices ``[7t, 7t-1, ..., 7t-lag_max]`` feeding week ``t``.

    Day 1 is the first day of week 1; days <= 0 lie before the sample. If
    ``first_day`` (the earliest day held by the climate series) is given, a
    window reaching past it raises :class:`InputError`.
    """
    if lag_max < 0:
        raise ValueError("lag_max must be non-negative")
    t = week.t if isinstance(week, WeekIndex) else WeekIndex(int(week)).t
    ref = DAYS_PER_WEEK * t
    days = list(range(ref, ref - lag_max - 1, -1))
    if first_day is not None and days[-1] < first_day:
        need = 1 - days[-1] if days[-1] < 1 else 0
        raise InputError(
            f"lag window of week {t} starts at day {days[-1]} but the climate series "
            f"starts at day {first_day}; supply at least {need} days of pre-sample padding"
        )
    return days


def required_padding(lag_max: int) -> int:
    """Pre-sample days needed by week 1 (lag window and wave lookback)."""
    return max(lag_max - (DAYS_PER_WEEK - 1), WAVE_LOOKBACK, 0)


def age_sort_key(label: str):
    m = re.match(r"\s*(\d+)", str(label))
    return (0, int(m.group(1)), str(label)) if m else (1, 0, str(label))


@dataclass(frozen=True, eq=False)
class DailyClimateSeries:
    """Daily mean/min/max UTCI on a day axis aligned to sample weeks.

    Position ``pad + tau - 1`` of each array holds day ``tau``; the first
    ``pad`` entries are pre-sample days ``1 - pad .. 0``.
    """

    mean: np.ndarray
    min: np.ndarray
    max: np.ndarray
    pad: int = 0
    region: str | None = None
    dates: np.ndarray | None = None

    def __post_init__(self):
        arrs = []
        for name in ("mean", "min", "max"):
            a = np.asarray(getattr(self, name), dtype=float)
            if a.ndim != 1:
                raise InputError(f"climate {name} must be one-dimensional")
            if not np.all(np.isfinite(a)):
                raise InputError(f"climate {name} contains non-finite values")
            a.setflags(write=False)
            object.__setattr__(self, name, a)
            arrs.append(a)
        if not (len(arrs[0]) == len(arrs[1]) == len(arrs[2])):
            raise InputError("climate mean/min/max lengths differ")
        if self.pad < 0 or self.pad > len(arrs[0]):
            raise InputError(f"invalid padding {self.pad}")
        bad = np.flatnonzero((self.min > self.mean + 1e-9) | (self.mean > self.max + 1e-9))
        if bad.size:
            i = int(bad[0])
            raise InputError(
                f"climate day {i - self.pad + 1}{self._where()}: min <= mean <= max violated "
                f"({self.min[i]}, {self.mean[i]}, {self.max[i]})"
            )
        if self.dates is not None:
            d = np.asarray(self.dates, dtype="datetime64[D]")
            if len(d) != len(arrs[0]):
                raise InputError("climate dates length differs from values")
            object.__setattr__(self, "dates", d)

    def _where(self):
        return f" ({self.region})" if self.region else ""

    def __len__(self):
        return len(self.mean)

    @property
    def first_day(self) -> int:
        return 1 - self.pad

    @property
    def n_days(self) -> int:
        """Number of in-sample days (day 1 onwards)."""
        return len(self.mean) - self.pad

    @property
    def n_weeks(self) -> int:
        return self.n_days // DAYS_PER_WEEK

    def _pos(self, days):
        days = np.asarray(days)
        pos = days + self.pad - 1
        if pos.size and (pos.min() < 0 or pos.max() >= len(self.mean)):
            lo, hi = int(days.min()), int(days.max())
            raise InputError(
                f"climate series{self._where()} covers days {self.first_day}..{self.n_days}, "
                f"requested {lo}..{hi}"
            )
        return pos

    def values(self, days, kind: str = "mean") -> np.ndarray:
        return getattr(self, kind)[self._pos(days)]

    def lag_matrix(self, lag_max: int, weeks=None) -> np.ndarray:
        """Matrix of daily means, row per week, column per lag 0..lag_max."""
        weeks = np.arange(1, self.n_weeks + 1) if weeks is None else np.asarray(weeks)
        if weeks.size:
            lag_window(int(weeks.min()), lag_max, self.first_day)
        days = DAYS_PER_WEEK * weeks[:, None] - np.arange(lag_max + 1)[None, :]
        return self.mean[self._pos(days)]

    def with_padding(self, pad: int) -> "DailyClimateSeries":
        """Return a copy carrying exactly ``pad`` pre-sample days.

        Missing leading days are filled by repeating the earliest day, with a
        warning.
        """
        if pad == self.pad:
            return self
        if pad < self.pad:
            cut = self.pad - pad
            return self._replace(slice(cut, None), pad)
        extra = pad - self.pad
        warnings.warn(
            f"climate series{self._where()} lacks {extra} pre-sample day(s); "
            "replicating the first observed day backwards",
            stacklevel=2,
        )
        idx = np.r_[np.zeros(extra, dtype=int), np.arange(len(self.mean))]
        dates = None
        if self.dates is not None:
            dates = np.r_[self.dates[0] - np.arange(extra, 0, -1), self.dates]
        return DailyClimateSeries(
            self.mean[idx], self.min[idx], self.max[idx], pad, self.region, dates
        )

    def _replace(self, sl, pad):
        dates = None if self.dates is None else self.dates[sl]
        return DailyClimateSeries(
            self.mean[sl], self.min[sl], self.max[sl], pad, self.region, dates
        )

    def weeks(self, start: int, stop: int, pad: int | None = None) -> "DailyClimateSeries":
        """Sub-series holding weeks ``start..stop`` (inclusive) renumbered from 1.

        Pre-sample days are taken from the actual preceding days when the
        series holds them.
        """
        if start < 1 or stop < start or stop > self.n_weeks:
            raise InputError(
                f"weeks {start}..{stop} outside the {self.n_weeks} weeks of the series"
            )
        pad = self.pad if pad is None else pad
        first = DAYS_PER_WEEK * (start - 1) + 1
        avail = min(pad, first - self.first_day)
        lo = first - avail + self.pad - 1
        hi = DAYS_PER_WEEK * stop + self.pad
        sub = self._replace(slice(lo, hi), avail)
        return sub.with_padding(pad) if avail < pad else sub

    def shifted(self, delta: float) -> "DailyClimateSeries":
        """Uniform offset of all three daily series (e.g. a warming scenario)."""
        return DailyClimateSeries(
            self.mean + delta, self.min + delta, self.max + delta,
            self.pad, self.region, self.dates,
        )


def _lower(df):
    df = df.copy()
    df.columns = [str(c).strip().lower() for c in df.columns]
    return df


@dataclass(frozen=True, eq=False)
class MortalityPanel:
    """Weekly deaths, annual populations and weekly rates, shaped (age, week, region).

    ``rates`` holds the raw ``D / (P / 52)``; ``log_rates`` replaces zero-death
    cells by ``0.5 / E`` before taking logs (see ``zero_cells``).
    """

    ages: tuple
    regions: tuple
    first_year: int
    deaths: np.ndarray
    population: np.ndarray
    first_week: int = 1
    zero_cells: np.ndarray = field(init=False)

    def __post_init__(self):
        deaths = np.asarray(self.deaths, dtype=float)
        pop = np.asarray(self.population, dtype=float)
        n_age, n_reg = len(self.ages), len(self.regions)
        if deaths.ndim != 3 or deaths.shape[0] != n_age or deaths.shape[2] != n_reg:
            raise InputError(f"deaths must have shape (ages, weeks, regions), got {deaths.shape}")
        if pop.ndim != 3 or pop.shape[0] != n_age or pop.shape[2] != n_reg:
            raise InputError(f"population must have shape (ages, years, regions), got {pop.shape}")
        if np.any(deaths < 0) or not np.all(np.isfinite(deaths)):
            raise InputError("deaths must be finite and non-negative")
        if np.any(pop <= 0) or not np.all(np.isfinite(pop)):
            raise InputError("population must be finite and positive")
        if pop.shape[1] <= self._year_idx(deaths.shape[1] - 1):
            raise InputError("population does not cover every sample year")
        for a in (deaths, pop):
            a.setflags(write=False)
        object.__setattr__(self, "deaths", deaths)
        object.__setattr__(self, "population", pop)
        zc = deaths == 0
        zc.setflags(write=False)
        object.__setattr__(self, "zero_cells", zc)

    def _year_idx(self, k):
        return (np.asarray(k) + self.first_week - 1) // WEEKS_PER_YEAR

    @property
    def n_weeks(self) -> int:
        return self.deaths.shape[1]

    @property
    def exposure(self) -> np.ndarray:
        yi = self._year_idx(np.arange(self.n_weeks))
        return self.population[:, yi, :] / WEEKS_PER_YEAR

    @property
    def rates(self) -> np.ndarray:
        return self.deaths / self.exposure

    @property
    def log_rates(self) -> np.ndarray:
        e = self.exposure
        d = np.where(self.zero_cells, 0.5, self.deaths)
        return np.log(d / e)

    def week_labels(self) -> list[tuple[int, int]]:
        out = []
        for k in range(self.n_weeks):
            w = k + self.first_week - 1
            out.append((self.first_year + w // WEEKS_PER_YEAR, w % WEEKS_PER_YEAR + 1))
        return out

    def truncate(self, n_weeks: int) -> "MortalityPanel":
        """Panel restricted to the first ``n_weeks`` weeks."""
        if not 1 <= n_weeks <= self.n_weeks:
            raise InputError(f"cannot truncate {self.n_weeks}-week panel to {n_weeks} weeks")
        n_years = int(self._year_idx(n_weeks - 1)) + 1
        return MortalityPanel(
            self.ages, self.regions, self.first_year,
            self.deaths[:, :n_weeks, :], self.population[:, :n_years, :], self.first_week,
        )

    def region_index(self, region) -> int:
        try:
            return self.regions.index(region)
        except ValueError:
            raise InputError(f"unknown region {region!r}") from None

    def age_groups(self) -> list[AgeGroup]:
        return [AgeGroup(a, i + 1) for i, a in enumerate(self.ages)]


def build_panel(deaths_table: pd.DataFrame, population_table: pd.DataFrame,
                ages=None, regions=None) -> MortalityPanel:
    """Assemble a :class:`MortalityPanel` from long-format tables.

    ``deaths_table`` has columns ``region, age_group, year, week, deaths`` and
    ``population_table`` has ``region, age_group, year, population``. ISO week
    53 rows are dropped with a warning. Every (age, week, region) cell between
    the first and last observed week must be present.
    """
    d = _lower(deaths_table)
    p = _lower(population_table)
    for col in ("region", "age_group", "year", "week", "deaths"):
        if col not in d.columns:
            raise InputError(f"deaths table lacks column {col!r}")
    for col in ("region", "age_group", "year", "population"):
        if col not in p.columns:
            raise InputError(f"population table lacks column {col!r}")
    d = d.astype({"region": str, "age_group": str})
    p = p.astype({"region": str, "age_group": str})
    if (d["week"] == 53).any():
        warnings.warn("dropping ISO week 53 rows (52-week year convention)", stacklevel=2)
        d = d[d["week"] != 53]
    if d.empty:
        raise InputError("no data rows")
    if ((d["week"] < 1) | (d["week"] > WEEKS_PER_YEAR)).any():
        raise InputError("week numbers must lie in 1..53")

    ages = tuple(ages) if ages is not None else tuple(sorted(d["age_group"].unique(), key=age_sort_key))
    regions = tuple(regions) if regions is not None else tuple(sorted(d["region"].unique()))
    d = d[d["age_group"].isin(ages) & d["region"].isin(regions)]

    pos = (d["year"].astype(int) * WEEKS_PER_YEAR + d["week"].astype(int) - 1).to_numpy()
    start, stop = int(pos.min()), int(pos.max())
    first_year, first_week = start // WEEKS_PER_YEAR, start % WEEKS_PER_YEAR + 1
    n_weeks = stop - start + 1
    full = pd.MultiIndex.from_product(
        [ages, range(start, stop + 1), regions], names=["age_group", "pos", "region"]
    )
    d = d.assign(pos=pos).set_index(["age_group", "pos", "region"])["deaths"]
    if d.index.has_duplicates:
        dup = d.index[d.index.duplicated()][0]
        raise InputError(f"duplicate deaths cell {_cell(dup)}")
    missing = full.difference(d.index)
    if len(missing):
        raise InputError(f"missing deaths cell {_cell(missing[0])} ({len(missing)} missing in total)")
    deaths = d.reindex(full).to_numpy(float).reshape(len(ages), n_weeks, len(regions))

    last_year = stop // WEEKS_PER_YEAR
    years = range(first_year, last_year + 1)
    fullp = pd.MultiIndex.from_product([ages, years, regions], names=["age_group", "year", "region"])
    p = p.assign(year=p["year"].astype(int)).set_index(["age_group", "year", "region"])["population"]
    if p.index.has_duplicates:
        raise InputError(f"duplicate population cell {p.index[p.index.duplicated()][0]}")
    missing = fullp.difference(p.index)
    if len(missing):
        a, y, r = missing[0]
        raise InputError(f"missing population cell (region={r}, age_group={a}, year={y})")
    pop = p.reindex(fullp).to_numpy(float)
    if np.any(pop <= 0):
        k = int(np.flatnonzero(pop <= 0)[0])
        a, y, r = fullp[k]
        raise InputError(f"non-positive population (region={r}, age_group={a}, year={y})")
    pop = pop.reshape(len(ages), len(years), len(regions))
    panel = MortalityPanel(ages, regions, first_year, deaths, pop, first_week)
    if panel.zero_cells.any():
        warnings.warn(
            f"{int(panel.zero_cells.sum())} zero-death cell(s): log-rates use 0.5/E",
            stacklevel=2,
        )
    return panel


def _cell(key):
    a, pos, r = key
    return f"(region={r}, age_group={a}, year={pos // WEEKS_PER_YEAR}, week={pos % WEEKS_PER_YEAR + 1})"
