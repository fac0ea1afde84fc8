import numpy as np
import pandas as pd
import pytest
from hypothesis import given, strategies as st

from climort.data import (DailyClimateSeries, MortalityPanel, WeekIndex, build_panel, lag_window,
                          required_padding)
from climort.exceptions import InputError


def _tables(deaths=10.0, pop=52000.0, weeks=2):
    d = pd.DataFrame([("R", "85+", 2016, w, deaths) for w in range(1, weeks + 1)],
                     columns=["region", "age_group", "year", "week", "deaths"])
    p = pd.DataFrame([("R", "85+", 2016, pop)], columns=["region", "age_group", "year", "population"])
    return d, p


def test_rate_arithmetic():
    panel = build_panel(*_tables())
    assert panel.rates[0, 0, 0] == pytest.approx(0.01)


def test_zero_death_cell_flagged_and_corrected():
    with pytest.warns(UserWarning):
        panel = build_panel(*_tables(deaths=0.0))
    assert panel.rates[0, 0, 0] == 0
    assert panel.zero_cells.all()
    assert panel.log_rates[0, 0, 0] == pytest.approx(np.log(0.5 / 1000.0))


def test_missing_cell_named():
    d, p = _tables(weeks=3)
    d = d.drop(index=1)
    with pytest.raises(InputError, match="week=2"):
        build_panel(d, p)


def test_zero_population_rejected():
    d, p = _tables()
    p.loc[0, "population"] = 0
    with pytest.raises(InputError):
        build_panel(d, p)


def test_week_53_dropped_with_warning():
    d, p = _tables(weeks=3)
    d = pd.concat([d, pd.DataFrame([("R", "85+", 2016, 53, 4.0)], columns=d.columns)])
    with pytest.warns(UserWarning, match="53"):
        panel = build_panel(d, p)
    assert panel.n_weeks == 3


def test_synthetic_panel_complete(synth):
    panel = synth.panel
    assert panel.deaths.shape == (4, 260, 3)
    assert panel.deaths[:, :, 0].size == 1040
    assert np.all(panel.rates > 0)


def test_round_trip_deaths(synth):
    panel = synth.panel
    back = panel.rates * panel.population[:, np.arange(260) // 52, :] / 52
    np.testing.assert_allclose(back, panel.deaths, rtol=1e-12)


def test_year_convention():
    assert WeekIndex(52).year_offset == 0
    assert WeekIndex(53).year_offset == 1
    assert WeekIndex(53).week_of_year == 1
    assert WeekIndex(3).reference_day == 21


def test_lag_window_examples():
    assert lag_window(1, 21) == list(range(7, -15, -1))
    assert lag_window(2, 21) == list(range(14, -8, -1))
    assert lag_window(52, 0) == [364]
    assert required_padding(21) == 15


def test_lag_window_underflow_cites_padding():
    with pytest.raises(InputError, match="15 days"):
        lag_window(1, 21, first_day=1)


@given(st.integers(1, 500), st.integers(0, 60))
def test_lag_window_span(t, L):
    w = lag_window(t, L)
    assert w[0] - w[-1] == L and len(w) == L + 1 and w[0] == 7 * t


def test_climate_ordering_invariant():
    with pytest.raises(InputError, match="min <= mean <= max"):
        DailyClimateSeries([1.0, 2.0], [0.0, 3.0], [2.0, 4.0])


def test_padding_replication_warns():
    c = DailyClimateSeries(np.arange(14.0), np.arange(14.0) - 1, np.arange(14.0) + 1)
    with pytest.warns(UserWarning, match="replicating"):
        p = c.with_padding(3)
    assert p.first_day == -2 and p.values([-2, -1, 0, 1]).tolist() == [0, 0, 0, 0]


def test_weeks_uses_real_prior_days():
    mean = np.arange(7 * 10 + 15, dtype=float)
    c = DailyClimateSeries(mean, mean - 1, mean + 1, pad=15)
    sub = c.weeks(3, 5)
    assert sub.n_weeks == 3 and sub.pad == 15
    np.testing.assert_array_equal(sub.values(np.arange(-14, 22)), c.values(np.arange(-14 + 14, 22 + 14)))


def test_truncate_keeps_prefix(synth):
    t = synth.panel.truncate(102)
    assert t.n_weeks == 102 and t.population.shape[1] == 2
    np.testing.assert_array_equal(t.rates, synth.panel.rates[:, :102])
    with pytest.raises(InputError):
        synth.panel.truncate(0)
