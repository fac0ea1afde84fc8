"""Expanding-window cross-validation of point forecasts."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd
from sklearn.base import clone

from .data import DailyClimateSeries, MortalityPanel
from .exceptions import ConfigError, InputError

log = logging.getLogger(__name__)

MAE_SCALE = 100.0


@dataclass(frozen=True)
class CvPlan:
    """Expanding-window plan.

    Fold ``j`` (1-based) trains on weeks ``1 .. initial + step (j - 1)`` and
    tests the following ``horizon`` weeks. ``shift_first_fold=True`` trains
    fold ``j`` through ``initial + step j`` instead.
    """

    initial: int = 102
    step: int = 8
    horizon: int = 78
    folds: int = 10
    shift_first_fold: bool = False

    def __post_init__(self):
        for name in ("initial", "step", "horizon", "folds"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise ConfigError(f"CV {name} must be a positive integer, got {v!r}")

    def train_end(self, j: int) -> int:
        if not 1 <= j <= self.folds:
            raise InputError(f"fold {j} outside 1..{self.folds}")
        return self.initial + self.step * (j if self.shift_first_fold else j - 1)

    @property
    def required_weeks(self) -> int:
        return self.train_end(self.folds) + self.horizon

    def check(self, n_weeks: int):
        """Raise :class:`ConfigError` quoting the violated inequality."""
        k = self.folds if self.shift_first_fold else self.folds - 1
        need = self.required_weeks
        if need > n_weeks:
            raise ConfigError(
                f"infeasible CV plan: initial + step*{k} + horizon <= T violated "
                f"({self.initial} + {self.step}*{k} + {self.horizon} = {need} > T = {n_weeks})"
            )

    def splits(self, n_weeks: int):
        """Yield ``(fold, train_end, test_weeks)`` with 1-based week numbers."""
        self.check(n_weeks)
        for j in range(1, self.folds + 1):
            end = self.train_end(j)
            yield j, end, np.arange(end + 1, end + self.horizon + 1)


def mean_absolute_error(observed, predicted, axis=(1,)) -> np.ndarray:
    """Mean of ``|observed - predicted|`` over ``axis``."""
    o = np.asarray(observed, dtype=float)
    p = np.asarray(predicted, dtype=float)
    if o.shape != p.shape:
        raise InputError(f"observed {o.shape} and predicted {p.shape} shapes differ")
    return np.abs(o - p).mean(axis=axis)


def _climate_list(climate, n):
    if climate is None:
        return None
    if isinstance(climate, DailyClimateSeries):
        climate = [climate]
    climate = list(climate)
    if len(climate) != n:
        raise InputError(f"{len(climate)} climate series for {n} regions")
    return climate


def fold_forecasts(model, panel: MortalityPanel, climate, plan: CvPlan):
    """Fit ``model`` per fold and collect forecasts.

    Returns observed and predicted rates shaped (fold, age, horizon, region).
    Each fold fits a clone on a truncated panel and the matching climate
    window, so nothing after the training end reaches the fit.
    """
    climate = _climate_list(climate, len(panel.regions))
    rates = panel.rates
    obs, pred = [], []
    for j, end, test in plan.splits(panel.n_weeks):
        train = panel.truncate(end)
        m = clone(model)
        use_climate = getattr(m, "use_climate", True) and climate is not None
        train_clim = [c.weeks(1, end) for c in climate] if use_climate else None
        m.fit(train_clim, train)
        if use_climate:
            test_clim = [c.weeks(int(test[0]), int(test[-1])) for c in climate]
            p = m.predict(test_clim)
        else:
            p = m.predict(None, horizon=test.size)
        log.debug("fold %d: trained through week %d", j, end)
        obs.append(rates[:, test - 1, :])
        pred.append(p)
    return np.stack(obs), np.stack(pred)


def run_cv(panel: MortalityPanel, climate, models: dict, plan: CvPlan | None = None) -> pd.DataFrame:
    """Expanding-window MAE (x100) per region, model and age group.

    Parameters
    ----------
    panel : MortalityPanel
    climate : list of DailyClimateSeries
        Observed climate per region covering every test window.
    models : dict
        Name to unfitted estimator. Estimators follow the ``fit(X, y)`` /
        ``predict(X)`` convention of :mod:`climort.estimators`.
    plan : CvPlan, optional

    Returns
    -------
    DataFrame with columns ``region, model, age_group, mae_x100``.
    """
    plan = plan or CvPlan()
    plan.check(panel.n_weeks)
    recs = []
    for name, model in models.items():
        obs, pred = fold_forecasts(model, panel, climate, plan)
        mae = mean_absolute_error(obs, pred, axis=(0, 2)) * MAE_SCALE
        for i, r in enumerate(panel.regions):
            for x, a in enumerate(panel.ages):
                recs.append((r, name, a, float(mae[x, i])))
    return pd.DataFrame(recs, columns=["region", "model", "age_group", "mae_x100"])
