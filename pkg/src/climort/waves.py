"""Thermal-stress classification and weekly heatwave / coldwave day counts."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import DAYS_PER_WEEK, WAVE_LOOKBACK, DailyClimateSeries
from .exceptions import InputError

COLD_THRESHOLD = -13.0
HEAT_THRESHOLD = 32.0
RUN_LENGTH = WAVE_LOOKBACK + 1


def stress(u):
    """Three-level stress class: -1 below -13, +1 above 32, else 0.

    Thresholds themselves count as no significant stress. Works elementwise
    on arrays.
    """
    u = np.asarray(u, dtype=float)
    out = np.where(u > HEAT_THRESHOLD, 1, np.where(u < COLD_THRESHOLD, -1, 0))
    return int(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class WaveCounts:
    hwd: np.ndarray
    cwd: np.ndarray


def wave_day_indicators(values, level: int) -> np.ndarray:
    """1 on days where the day and the two before it all have stress ``level``.

    The first two entries have no full lookback and are reported as 0.
    """
    hit = stress(np.asarray(values, dtype=float)) == level
    out = np.zeros(hit.shape, dtype=int)
    if hit.size >= RUN_LENGTH:
        run = hit[RUN_LENGTH - 1:].copy()
        for k in range(1, RUN_LENGTH):
            run &= hit[RUN_LENGTH - 1 - k: hit.size - k]
        out[RUN_LENGTH - 1:] = run
    return out


def wave_counts(climate: DailyClimateSeries, weeks=None) -> WaveCounts:
    """HWD and CWD per week from daily max (heat) and daily min (cold).

    Each week needs the two days before its first day; lookback crosses week
    boundaries using the actual prior days.
    """
    weeks = np.arange(1, climate.n_weeks + 1) if weeks is None else np.atleast_1d(weeks)
    if weeks.size == 0:
        return WaveCounts(np.zeros(0, int), np.zeros(0, int))
    first_needed = DAYS_PER_WEEK * (int(weeks.min()) - 1) + 1 - WAVE_LOOKBACK
    if first_needed < climate.first_day:
        raise InputError(
            f"wave counts for week {int(weeks.min())} need day {first_needed}; "
            f"climate series starts at day {climate.first_day}"
        )
    h = wave_day_indicators(climate.max, 1)
    c = wave_day_indicators(climate.min, -1)
    days = DAYS_PER_WEEK * (weeks[:, None] - 1) + np.arange(1, DAYS_PER_WEEK + 1)[None, :]
    pos = climate._pos(days)
    return WaveCounts(h[pos].sum(axis=1), c[pos].sum(axis=1))


def wave_days(climate: DailyClimateSeries, week: int) -> WaveCounts:
    """Counts for a single week ``week``."""
    wc = wave_counts(climate, [week])
    return WaveCounts(int(wc.hwd[0]), int(wc.cwd[0]))
