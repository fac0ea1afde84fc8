"""CSV readers, climate aggregation and the run configuration."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .data import (DAYS_PER_WEEK, DailyClimateSeries, MortalityPanel, build_panel,
                   required_padding)
from .exceptions import ConfigError, InputError

MORTALITY_COLUMNS = ("region", "age_group", "year", "week", "deaths")
POPULATION_COLUMNS = ("region", "age_group", "year", "population")
HOURLY_COLUMNS = ("region", "date", "hour", "utci")
DAILY_COLUMNS = ("region", "date", "utci_mean", "utci_min", "utci_max")


def _read_rows(path, columns):
    """Yield ``(line_no, dict)`` for data rows; '#' lines are comments."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"{path}: file not found")
    with path.open(newline="") as fh:
        lines = ((k, line) for k, line in enumerate(fh, start=1)
                 if line.strip() and not line.lstrip().startswith("#"))
        try:
            header_no, header = next(lines)
        except StopIteration:
            raise InputError(f"{path}: no data rows") from None
        names = [h.strip().lower() for h in next(csv.reader([header]))]
        missing = [c for c in columns if c not in names]
        if missing:
            raise InputError(f"{path}:{header_no}: missing column(s) {', '.join(missing)}; "
                             f"expected header {','.join(columns)}")
        rows = []
        for k, line in lines:
            vals = next(csv.reader([line]))
            if len(vals) != len(names):
                raise InputError(f"{path}:{k}: expected {len(names)} fields, got {len(vals)}")
            rows.append((k, dict(zip(names, (v.strip() for v in vals)))))
    if not rows:
        raise InputError(f"{path}: no data rows")
    return path, rows


def _parse(path, k, row, col, kind):
    raw = row[col]
    try:
        if kind is int:
            v = float(raw)
            if not v.is_integer():
                raise ValueError
            return int(v)
        if kind is float:
            v = float(raw)
            if not math.isfinite(v):
                raise ValueError
            return v
        if kind == "date":
            return np.datetime64(raw, "D")
        if not raw:
            raise ValueError
        return raw
    except ValueError:
        raise InputError(f"{path}:{k}: invalid {col} {raw!r}") from None


def _table(path, columns, kinds, key):
    path, rows = _read_rows(path, columns)
    recs, seen = [], {}
    for k, row in rows:
        rec = {c: _parse(path, k, row, c, t) for c, t in zip(columns, kinds)}
        kk = tuple(rec[c] for c in key)
        if kk in seen:
            raise InputError(f"{path}:{k}: duplicate key {kk} (first seen on line {seen[kk]})")
        seen[kk] = k
        recs.append(rec)
    return pd.DataFrame.from_records(recs, columns=list(columns))


def read_mortality_csv(path) -> pd.DataFrame:
    """Weekly deaths table ``region,age_group,year,week,deaths``."""
    df = _table(path, MORTALITY_COLUMNS, (str, str, int, int, float), MORTALITY_COLUMNS[:4])
    bad = df.index[(df["deaths"] < 0) | (df["week"] < 1) | (df["week"] > 53)]
    if len(bad):
        raise InputError(f"{path}: row {int(bad[0]) + 1}: deaths must be >= 0 and week in 1..53")
    return df


def read_population_csv(path) -> pd.DataFrame:
    """Annual population table ``region,age_group,year,population``."""
    df = _table(path, POPULATION_COLUMNS, (str, str, int, float), POPULATION_COLUMNS[:3])
    if (df["population"] <= 0).any():
        r = df.loc[df["population"] <= 0].iloc[0]
        raise InputError(f"{path}: non-positive population for "
                         f"({r['region']}, {r['age_group']}, {r['year']})")
    return df


def read_panel(deaths_path, population_path, ages=None, regions=None) -> MortalityPanel:
    return build_panel(read_mortality_csv(deaths_path), read_population_csv(population_path),
                       ages, regions)


def aggregate_hourly(df: pd.DataFrame) -> pd.DataFrame:
    """Per (region, date) min/mean/max of hourly UTCI."""
    g = df.groupby(["region", "date"], sort=False)["utci"]
    out = g.agg(utci_mean="mean", utci_min="min", utci_max="max", n_hours="size").reset_index()
    short = out[out["n_hours"] < 24]
    for _, r in short.iterrows():
        warnings.warn(f"{r['region']} {pd.Timestamp(r['date']).date()}: only {r['n_hours']} "
                      "hourly values; aggregating those available", stacklevel=3)
    return out.drop(columns="n_hours")


def _daily_series(path, df) -> dict:
    out = {}
    for region, g in df.groupby("region", sort=False):
        dates = g["date"].to_numpy(dtype="datetime64[D]")
        step = np.diff(dates).astype(int)
        if np.any(step <= 0):
            k = int(np.flatnonzero(step <= 0)[0])
            raise InputError(f"{path}: region {region}: dates out of order or repeated at "
                             f"{dates[k]} -> {dates[k + 1]}")
        if np.any(step > 1):
            k = int(np.flatnonzero(step > 1)[0])
            raise InputError(f"{path}: region {region}: gap after {dates[k]} "
                             f"({step[k] - 1} missing day(s))")
        out[region] = DailyClimateSeries(g["utci_mean"].to_numpy(), g["utci_min"].to_numpy(),
                                         g["utci_max"].to_numpy(), 0, region, dates)
    return out


def read_climate_csv(path, cadence: str = "daily") -> dict:
    """Daily climate per region from an hourly or daily UTCI file.

    Returns a dict ``region -> DailyClimateSeries`` whose day axis starts at
    the first date in the file (no padding assigned yet; see
    :func:`align_climate`).
    """
    if cadence == "hourly":
        path, rows = _read_rows(path, HOURLY_COLUMNS)
        recs = []
        for k, row in rows:
            hour = _parse(path, k, row, "hour", int)
            if not 0 <= hour <= 23:
                raise InputError(f"{path}:{k}: hour {hour} outside 0..23")
            recs.append((_parse(path, k, row, "region", str), _parse(path, k, row, "date", "date"),
                         hour, _parse(path, k, row, "utci", float)))
        df = pd.DataFrame(recs, columns=list(HOURLY_COLUMNS))
        for region, g in df.groupby("region", sort=False):
            back = np.flatnonzero(np.diff(g["date"].to_numpy(dtype="datetime64[D]")).astype(int) < 0)
            if back.size:
                k = rows[int(g.index[back[0] + 1])][0]
                raise InputError(f"{path}:{k}: region {region}: date out of order")
        dup = df.duplicated(["region", "date", "hour"])
        if dup.any():
            k = rows[int(np.flatnonzero(dup)[0])][0]
            raise InputError(f"{path}:{k}: duplicate hourly record")
        daily = aggregate_hourly(df)
    elif cadence == "daily":
        daily = _table(path, DAILY_COLUMNS, (str, "date", float, float, float), ("region", "date"))
    else:
        raise ConfigError(f"climate cadence must be 'hourly' or 'daily', got {cadence!r}")
    return _daily_series(path, daily)


def read_scenario_csv(path) -> dict:
    """Future daily UTCI per region (daily schema)."""
    return read_climate_csv(path, "daily")


def iso_week_start(year: int, week: int) -> np.datetime64:
    return np.datetime64(pd.Timestamp.fromisocalendar(year, week, 1).date())


def align_climate(series: DailyClimateSeries, week_labels, lag_max: int) -> DailyClimateSeries:
    """Re-index a dated daily series onto the panel's weeks plus lag padding.

    ``week_labels`` are the panel's ``(year, ISO week)`` pairs. Each panel
    week contributes its seven ISO dates in order; days of ISO weeks dropped
    from the panel (week 53) are skipped with a warning, so lag windows
    spanning them reach back into the preceding week.
    """
    if series.dates is None:
        raise InputError("climate series carries no dates")
    pad = required_padding(lag_max)
    pos = {d: k for k, d in enumerate(series.dates.tolist())}
    idx = []
    skipped = 0
    prev = None
    for year, week in week_labels:
        start = iso_week_start(year, week)
        if prev is not None and (start - prev).astype(int) > DAYS_PER_WEEK:
            skipped += 1
        prev = start
        for d in range(DAYS_PER_WEEK):
            day = (start + np.timedelta64(d, "D")).tolist()
            if day not in pos:
                raise InputError(f"climate{series._where()} has no record for {day} "
                                 f"(week {year}-W{week:02d})")
            idx.append(pos[day])
    if skipped:
        warnings.warn(f"climate{series._where()}: {skipped} dropped week(s) between panel weeks; "
                      "lag windows skip those days", stacklevel=2)
    first = idx[0]
    avail = min(pad, first)
    idx = list(range(first - avail, first)) + idx
    idx = np.asarray(idx)
    sub = DailyClimateSeries(series.mean[idx], series.min[idx], series.max[idx], avail,
                             series.region, series.dates[idx])
    return sub.with_padding(pad) if avail < pad else sub


def scenario_series(scenario: DailyClimateSeries, lag_max: int,
                    history: DailyClimateSeries | None = None) -> DailyClimateSeries:
    """Scenario days as whole projection weeks with lag padding.

    Padding days come from ``history`` when it holds the dates right before
    the scenario starts; otherwise the first scenario day is replicated
    backwards (with a warning). A trailing partial week is dropped.
    """
    pad = required_padding(lag_max)
    n_weeks = len(scenario) // DAYS_PER_WEEK
    if n_weeks < 1:
        raise InputError(f"scenario{scenario._where()} has {len(scenario)} days; need at least one week")
    keep = DAYS_PER_WEEK * n_weeks
    mean, lo, hi = scenario.mean[:keep], scenario.min[:keep], scenario.max[:keep]
    dates = None if scenario.dates is None else scenario.dates[:keep]
    avail = 0
    if pad and history is not None and dates is not None and history.dates is not None:
        want = dates[0] - np.arange(pad, 0, -1).astype("timedelta64[D]")
        pos = {d: k for k, d in enumerate(history.dates.tolist())}
        got = [pos.get(d) for d in want.tolist()]
        while avail < pad and got[pad - 1 - avail] is not None:
            avail += 1
        if avail:
            idx = np.asarray(got[pad - avail:])
            mean = np.r_[history.mean[idx], mean]
            lo = np.r_[history.min[idx], lo]
            hi = np.r_[history.max[idx], hi]
            dates = np.r_[want[pad - avail:], dates]
    out = DailyClimateSeries(mean, lo, hi, avail, scenario.region, dates)
    return out.with_padding(pad) if avail < pad else out


@dataclass
class RunConfig:
    """Settings for a CLI run, loadable from a flat ``key = value`` file."""

    deaths: str = ""
    population: str = ""
    climate: str = ""
    climate_cadence: str = "daily"
    scenario: str = ""
    ages: list = field(default_factory=list)
    regions: list = field(default_factory=list)
    start_week: int = 1
    end_week: int = 0
    variant: str = "lc"
    lag_max: int = 21
    exposure_df: int = 4
    lag_df: int = 4
    tol: float = 1e-2
    max_iter: int = 20
    max_ar: int = 3
    seasonal: bool = True
    cv_initial: int = 102
    cv_step: int = 8
    cv_horizon: int = 78
    cv_folds: int = 10
    cv_shift_first_fold: bool = False
    n_boot: int = 1000
    n_paths: int = 10000
    offset: int = 0
    output: str = "out"
    seed: int = 20240101
    synth_regions: int = 3
    synth_weeks: int = 260
    synth_noise: float = 0.02
    synth_structure: str = "lc"
    synth_scenario_years: int = 15
    synth_warming: float = 0.0

    def validate(self) -> "RunConfig":
        if self.lag_max < 0:
            raise ConfigError("lag_max must be >= 0")
        if self.exposure_df < 2 or self.lag_df < 2:
            raise ConfigError("spline dimensions exposure_df and lag_df must be >= 2")
        if not self.tol > 0:
            raise ConfigError("tol must be > 0")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be >= 1")
        for name in ("cv_initial", "cv_step", "cv_horizon", "cv_folds", "n_boot", "n_paths"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.offset < 0:
            raise ConfigError("offset must be >= 0")
        if self.variant not in ("lc", "ll"):
            raise ConfigError(f"variant must be 'lc' or 'll', got {self.variant!r}")
        if self.climate_cadence not in ("daily", "hourly"):
            raise ConfigError("climate_cadence must be 'daily' or 'hourly'")
        if self.start_week < 1 or self.end_week < 0:
            raise ConfigError("start_week must be >= 1 and end_week >= 0")
        return self

    def digest(self) -> str:
        """Short hash of the settings that affect results (output dir excluded)."""
        d = dataclasses.asdict(self)
        d.pop("output")
        blob = json.dumps(d, sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:12]

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def _coerce(f: dataclasses.Field, raw):
    default = f.default if f.default is not dataclasses.MISSING else f.default_factory()
    if isinstance(raw, str):
        raw = raw.strip()
    try:
        if isinstance(default, bool):
            if isinstance(raw, bool):
                return raw
            low = str(raw).lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError
        if isinstance(default, int):
            v = float(raw)
            if not v.is_integer():
                raise ValueError
            return int(v)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, list):
            if isinstance(raw, (list, tuple)):
                return list(raw)
            return [s.strip() for s in str(raw).split(",") if s.strip()]
        return str(raw)
    except ValueError:
        raise ConfigError(f"invalid value {raw!r} for {f.name}") from None


def parse_config(text: str, source: str = "<config>") -> dict:
    """Parse ``key = value`` lines ('#' comments, blank lines ignored)."""
    fields = {f.name: f for f in dataclasses.fields(RunConfig)}
    out = {}
    for k, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{k}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in fields:
            raise ConfigError(f"{source}:{k}: unknown key {key!r}")
        try:
            out[key] = _coerce(fields[key], val)
        except ConfigError as exc:
            raise ConfigError(f"{source}:{k}: {exc}") from None
    return out


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Config file values, then non-None ``overrides``, validated.

    Relative input paths in the file are resolved against its directory.
    """
    values = {}
    fields = {f.name: f for f in dataclasses.fields(RunConfig)}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise InputError(f"{p}: config file not found")
        values = parse_config(p.read_text(), str(p))
        for key in ("deaths", "population", "climate", "scenario"):
            if values.get(key) and not Path(values[key]).is_absolute():
                values[key] = str(p.parent / values[key])
    for key, val in (overrides or {}).items():
        if val is None:
            continue
        if key not in fields:
            raise ConfigError(f"unknown setting {key!r}")
        values[key] = _coerce(fields[key], val)
    return RunConfig(**values).validate()


def write_config(cfg: RunConfig, path):
    lines = []
    for k, v in cfg.as_dict().items():
        if isinstance(v, list):
            v = ",".join(map(str, v))
        lines.append(f"{k} = {v}")
    Path(path).write_text("\n".join(lines) + "\n")
