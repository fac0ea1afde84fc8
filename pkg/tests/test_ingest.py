import warnings

import numpy as np
import pandas as pd
import pytest

from climort.exceptions import ConfigError, InputError
from climort.ingest import (RunConfig, align_climate, load_config, parse_config, read_climate_csv,
                            read_mortality_csv, read_population_csv, scenario_series)


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_mortality_reader_and_errors(tmp_path):
    p = write(tmp_path, "d.csv", "# comment\nregion,age_group,year,week,deaths\nR,85+,2016,1,12\nR,85+,2016,2,9\n")
    df = read_mortality_csv(p)
    assert df["deaths"].tolist() == [12.0, 9.0]
    bad = write(tmp_path, "b.csv", "region,age_group,year,week,deaths\nR,85+,2016,1,12\nR,85+,2016,x,9\n")
    with pytest.raises(InputError, match=r"b\.csv:3: invalid week"):
        read_mortality_csv(bad)
    dup = write(tmp_path, "u.csv", "region,age_group,year,week,deaths\nR,85+,2016,1,1\nR,85+,2016,1,2\n")
    with pytest.raises(InputError, match=r"u\.csv:3: duplicate key"):
        read_mortality_csv(dup)
    schema = write(tmp_path, "s.csv", "region,age,year,week,deaths\n")
    with pytest.raises(InputError, match="missing column"):
        read_mortality_csv(schema)
    with pytest.raises(InputError, match="no data rows"):
        read_mortality_csv(write(tmp_path, "e.csv", "region,age_group,year,week,deaths\n"))
    with pytest.raises(InputError, match="file not found"):
        read_mortality_csv(tmp_path / "nope.csv")
    with pytest.raises(InputError, match="expected 5 fields"):
        read_mortality_csv(write(tmp_path, "f.csv", "region,age_group,year,week,deaths\nR,85+,2016,1\n"))


def test_population_reader(tmp_path):
    p = write(tmp_path, "p.csv", "region,age_group,year,population\nR,85+,2016,1000\n")
    assert read_population_csv(p)["population"].item() == 1000.0
    with pytest.raises(InputError, match="non-positive"):
        read_population_csv(write(tmp_path, "q.csv", "region,age_group,year,population\nR,85+,2016,0\n"))


def hourly_text(days, values=range(10, 34), region="R"):
    rows = ["region,date,hour,utci"]
    for d in days:
        rows += [f"{region},{d},{h},{v}" for h, v in zip(range(24), values)]
    return "\n".join(rows) + "\n"


def test_hourly_aggregation(tmp_path):
    p = write(tmp_path, "h.csv", hourly_text(["2020-01-01", "2020-01-02"]))
    s = read_climate_csv(p, "hourly")["R"]
    np.testing.assert_allclose(s.mean, 21.5)
    np.testing.assert_allclose(s.min, 10.0)
    np.testing.assert_allclose(s.max, 33.0)


def test_hourly_short_day_warns(tmp_path):
    p = write(tmp_path, "h.csv", hourly_text(["2020-01-01"], values=range(10, 30)))
    with pytest.warns(UserWarning, match="only 20 hourly"):
        s = read_climate_csv(p, "hourly")["R"]
    assert s.mean[0] == pytest.approx(19.5)


def test_hourly_out_of_order(tmp_path):
    text = hourly_text(["2020-01-02"]) + hourly_text(["2020-01-01"]).split("\n", 1)[1]
    with pytest.raises(InputError, match=r"h\.csv:26: region R: date out of order"):
        read_climate_csv(write(tmp_path, "h.csv", text), "hourly")
    with pytest.raises(InputError, match="hour 24"):
        read_climate_csv(write(tmp_path, "g.csv", "region,date,hour,utci\nR,2020-01-01,24,1\n"), "hourly")


def test_daily_gaps_and_order(tmp_path):
    head = "region,date,utci_mean,utci_min,utci_max\n"
    gap = write(tmp_path, "g.csv", head + "R,2020-01-01,1,0,2\nR,2020-01-03,1,0,2\n")
    with pytest.raises(InputError, match="gap after 2020-01-01"):
        read_climate_csv(gap)
    back = write(tmp_path, "b.csv", head + "R,2020-01-02,1,0,2\nR,2020-01-01,1,0,2\n")
    with pytest.raises(InputError, match="out of order"):
        read_climate_csv(back)
    with pytest.raises(ConfigError):
        read_climate_csv(back, "monthly")


def dated_series(tmp_path, start="2015-12-01", n=200):
    dates = pd.date_range(start, periods=n, freq="D")
    df = pd.DataFrame({"region": "R", "date": dates.strftime("%Y-%m-%d"),
                       "utci_mean": np.arange(n, dtype=float), "utci_min": -1.0, "utci_max": 500.0})
    p = tmp_path / "c.csv"
    df.to_csv(p, index=False)
    return read_climate_csv(p)["R"]


def test_align_to_panel_weeks(tmp_path):
    s = dated_series(tmp_path)
    # ISO 2016-W01 starts on Monday 2016-01-04, which is day 34 of the file
    a = align_climate(s, [(2016, 1), (2016, 2)], lag_max=21)
    assert a.pad == 15 and a.n_weeks == 2
    np.testing.assert_allclose(a.values([1, 14]), [34, 47])
    np.testing.assert_allclose(a.values([-14]), [19])


def test_align_missing_day(tmp_path):
    s = dated_series(tmp_path, n=40)
    with pytest.raises(InputError, match="no record"):
        align_climate(s, [(2016, 1), (2016, 2)], 21)


def test_scenario_padding_from_history(tmp_path):
    s = dated_series(tmp_path)
    from climort.data import DailyClimateSeries
    scen = DailyClimateSeries(s.mean[100:114], s.min[100:114], s.max[100:114], 0, "R", s.dates[100:114])
    out = scenario_series(scen, 21, history=s)
    np.testing.assert_allclose(out.values([0, -14]), [99, 85])
    with pytest.warns(UserWarning):
        rep = scenario_series(scen, 21)
    np.testing.assert_allclose(rep.values([-14]), [100])


def test_config_parsing(tmp_path):
    d = parse_config("variant = ll  # comment\nages = 75-84, 85+\nseasonal = no\n")
    assert d == {"variant": "ll", "ages": ["75-84", "85+"], "seasonal": False}
    with pytest.raises(ConfigError, match=":1: unknown key"):
        parse_config("colour = red")
    with pytest.raises(ConfigError, match="invalid value"):
        parse_config("max_iter = 2.5")
    with pytest.raises(ConfigError, match="max_iter"):
        load_config(None, {"max_iter": "0"})
    cfg_path = write(tmp_path, "run.cfg", "deaths = d.csv\nseed = 7\n")
    cfg = load_config(cfg_path, {"seed": "9", "tol": None})
    assert cfg.seed == 9 and cfg.deaths == str(tmp_path / "d.csv")
    a, b = RunConfig(output="x"), RunConfig(output="y")
    assert a.digest() == b.digest() and a.digest() != RunConfig(seed=1).digest()
