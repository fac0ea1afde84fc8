import json

import pandas as pd
import pytest

from climort import __version__
from climort.cli import main


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--output", str(d), "--seed", "3", "--synth-weeks", "260",
                 "--synth-scenario-years", "1"]) == 0
    return d


def read(path):
    return pd.read_csv(path, comment="#")


def test_synth_outputs(synth_dir):
    for name in ("deaths", "population", "climate", "scenario"):
        first = (synth_dir / f"{name}.csv").read_text().splitlines()[0]
        assert first.startswith(f"# climort {__version__} config=") and first.endswith("seed=3")
    clim = read(synth_dir / "climate.csv")
    assert len(clim) == 3 * (260 * 7 + 15)
    man = json.loads((synth_dir / "truth" / "manifest.json").read_text())
    assert man["padding_days"] == 15 and man["climate_days_per_region"] == 1835
    assert (synth_dir / "truth" / "zeta.csv").exists()


def test_fit_and_determinism(synth_dir, tmp_path):
    cfg = str(synth_dir / "run.cfg")
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["fit", "-c", cfg, "--output", str(a)]) == 0
    assert main(["fit", "-c", cfg, "--output", str(b)]) == 0
    for f in ("a.csv", "b.csv", "kappa.csv", "zeta.csv", "zeta_se.csv", "trace.csv"):
        assert (a / f).read_bytes() == (b / f).read_bytes()
    man = json.loads((a / "manifest.json").read_text())
    assert all(v["passed"] for v in man["equivalence"].values())
    assert (a / "equivalence.txt").read_text().splitlines()[1].startswith("R1: pass")
    zeta = read(a / "zeta.csv")
    assert len(zeta) == 12 and "hwd" in zeta.columns


def test_ll_fit_reports_equivalence(synth_dir, tmp_path):
    assert main(["fit", "-c", str(synth_dir / "run.cfg"), "--variant", "ll",
                 "--output", str(tmp_path)]) == 0
    for f in ("A.csv", "B.csv", "K.csv", "b.csv", "kappa.csv"):
        assert (tmp_path / f).exists()
    assert (tmp_path / "equivalence.txt").read_text().splitlines()[1].startswith("all: ")


def test_curves_loadings_project_cv(synth_dir, tmp_path):
    cfg = str(synth_dir / "run.cfg")
    assert main(["curves", "-c", cfg, "--output", str(tmp_path)]) == 0
    curves = read(tmp_path / "curves.csv")
    assert {"region", "age_group", "utci", "rr", "rr_lo", "rr_hi"} <= set(curves.columns)
    assert main(["loadings", "-c", cfg, "--output", str(tmp_path)]) == 0
    assert len(read(tmp_path / "loadings_annual.csv")) == 3 * 4 * 5
    assert main(["project", "-c", cfg, "--output", str(tmp_path), "--n-paths", "200",
                 "--n-boot", "50"]) == 0
    proj = read(tmp_path / "projection.csv")
    assert len(proj) == 3 * 4 * 52 and (proj["p2.5"] <= proj["p97.5"]).all()
    assert proj["year"].iloc[0] == 2021
    assert (tmp_path / "projection_annual.csv").exists()
    assert main(["cv", "-c", cfg, "--output", str(tmp_path), "--cv-folds", "2",
                 "--cv-horizon", "26"]) == 0
    assert set(read(tmp_path / "cv.csv")["model"]) == {"lc", "dlnm-lc"}


def test_exit_codes(synth_dir, tmp_path, capsys):
    cfg = str(synth_dir / "run.cfg")
    assert main(["fit", "--deaths", str(tmp_path / "missing.csv"), "--population", "x",
                 "--climate", "y"]) == 2
    assert "file not found" in capsys.readouterr().err
    assert main(["fit", "-c", cfg, "--max-iter", "0"]) == 2
    assert main(["fit", "-c", cfg, "--variant", "ll", "--regions", "R1",
                 "--output", str(tmp_path)]) == 2
    assert main(["cv", "-c", cfg, "--end-week", "200", "--output", str(tmp_path)]) == 2
    assert "252 > T = 200" in capsys.readouterr().err
    assert main(["fit", "-c", str(tmp_path / "none.cfg")]) == 2
    with pytest.raises(SystemExit):
        main(["bogus"])


def test_model_failure_exit_code(monkeypatch, capsys):
    from climort import cli
    from climort.exceptions import ModelError

    def boom(cfg):
        raise ModelError("non-finite partial residuals at iteration 3")

    monkeypatch.setitem(cli.HANDLERS, "fit", boom)
    assert main(["fit"]) == 1
    assert "iteration 3" in capsys.readouterr().err
