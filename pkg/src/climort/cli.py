"""Command-line interface: ``climort {fit,curves,loadings,cv,project,synth}``.

Exit codes: 0 success, 1 model or numerical failure, 2 input or
configuration error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .backfit import check_equivalence
from .data import DAYS_PER_WEEK, WEEKS_PER_YEAR, MortalityPanel, required_padding
from .dlnm import lag_slice, overall_cumulative_curve
from .estimators import make_model
from .evaluate import CvPlan, run_cv
from .exceptions import ConfigError, InputError, ModelError
from .forecast import project
from .ingest import (RunConfig, align_climate, load_config, read_climate_csv, read_panel,
                     read_scenario_csv, scenario_series, write_config)
from .synth import SynthConfig, climate_table, generate, panel_tables, synthetic_climate, truth_tables

log = logging.getLogger("climort")

COMMANDS = ("fit", "curves", "loadings", "cv", "project", "synth")
LAG_SLICE_UTCI = (-5.0, 35.0)


# output helpers ------------------------------------------------------------
def header_line(cfg: RunConfig) -> str:
    return f"# climort {__version__} config={cfg.digest()} seed={cfg.seed}"


def write_csv(df: pd.DataFrame, path: Path, cfg: RunConfig):
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(header_line(cfg) + "\n")
        df.to_csv(fh, index=False, float_format="%.10g", lineterminator="\n")
    log.info("wrote %s", path)


def write_json(obj, path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


# inputs --------------------------------------------------------------------
def load_panel(cfg: RunConfig) -> MortalityPanel:
    for key in ("deaths", "population", "climate"):
        if not getattr(cfg, key):
            raise InputError(f"no {key} file configured (set {key} = PATH or --{key})")
    panel = read_panel(cfg.deaths, cfg.population, cfg.ages or None, cfg.regions or None)
    start, stop = cfg.start_week, cfg.end_week or panel.n_weeks
    if not 1 <= start <= stop <= panel.n_weeks:
        raise InputError(f"sample weeks {start}..{stop} outside the panel's 1..{panel.n_weeks}")
    if (start, stop) != (1, panel.n_weeks):
        panel = MortalityPanel(panel.ages, panel.regions, panel.first_year,
                               panel.deaths[:, start - 1:stop, :], panel.population,
                               panel.first_week + start - 1)
    return panel


def load_climate(cfg: RunConfig, panel: MortalityPanel):
    """Raw per-region daily series and their alignment to the panel weeks."""
    raw = read_climate_csv(cfg.climate, cfg.climate_cadence)
    missing = [r for r in panel.regions if r not in raw]
    if missing:
        raise InputError(f"{cfg.climate}: no climate for region(s) {', '.join(missing)}")
    labels = panel.week_labels()
    aligned = [align_climate(raw[r], labels, cfg.lag_max) for r in panel.regions]
    return raw, aligned


def build_model(cfg: RunConfig, use_climate: bool = True):
    return make_model(cfg.variant, lag_max=cfg.lag_max, exposure_df=cfg.exposure_df,
                      lag_df=cfg.lag_df, tol=cfg.tol, max_iter=cfg.max_iter,
                      use_climate=use_climate, max_ar=cfg.max_ar, seasonal=cfg.seasonal)


def fit_from_config(cfg: RunConfig):
    panel = load_panel(cfg)
    if cfg.variant == "ll" and len(panel.regions) < 2:
        raise ConfigError("variant ll needs at least two regions; the panel has one")
    raw, climate = load_climate(cfg, panel)
    model = build_model(cfg).fit(climate, panel)
    return panel, raw, climate, model


# bundle --------------------------------------------------------------------
def _fits(model):
    return model.backfit_ if isinstance(model.backfit_, list) else [model.backfit_]


def _param_frames(model, panel):
    ages = pd.Index(panel.ages, name="age_group")
    labels = panel.week_labels()
    weeks = pd.MultiIndex.from_tuples(labels, names=["year", "week"])
    regs = list(panel.regions)
    out = {}
    if model._variant == "dlnm-lc":
        ps = model.params_
        out["a"] = pd.DataFrame(np.column_stack([p.a for p in ps]), index=ages, columns=regs)
        out["b"] = pd.DataFrame(np.column_stack([p.b for p in ps]), index=ages, columns=regs)
        out["kappa"] = pd.DataFrame(np.column_stack([p.kappa for p in ps]), index=weeks, columns=regs)
    else:
        p = model.params_
        out["A"] = pd.DataFrame(p.A, index=ages, columns=regs)
        out["B"] = pd.DataFrame({"B": p.B}, index=ages)
        out["K"] = pd.DataFrame({"K": p.K}, index=weeks)
        out["b"] = pd.DataFrame(p.b, index=ages, columns=regs)
        out["kappa"] = pd.DataFrame(p.kappa, index=weeks, columns=regs)
    cols = list(model.transformers_[0].columns_)
    zrecs, crecs, srecs = [], [], []
    for i, r in enumerate(regs):
        for x, a in enumerate(panel.ages):
            f = model.cell_fit(x, i)
            zrecs.append([r, a] + list(f.coef))
            srecs.append([r, a, f.sigma2] + list(f.se))
            for j, cj in enumerate(cols):
                for k, ck in enumerate(cols):
                    crecs.append((r, a, cj, ck, f.cov[j, k]))
    out["zeta"] = pd.DataFrame(zrecs, columns=["region", "age_group"] + cols)
    out["zeta_se"] = pd.DataFrame(srecs, columns=["region", "age_group", "sigma2"] + cols)
    out["zeta_cov"] = pd.DataFrame(crecs, columns=["region", "age_group", "row", "col", "cov"])
    return out


def cmd_fit(cfg: RunConfig) -> int:
    out = Path(cfg.output)
    panel, _, _, model = fit_from_config(cfg)
    for name, df in _param_frames(model, panel).items():
        df = df if isinstance(df.index, pd.RangeIndex) else df.reset_index()
        write_csv(df, out / f"{name}.csv", cfg)
    fits = _fits(model)
    groups = list(panel.regions) if model._variant == "dlnm-lc" else ["all"]
    trace, reports = [], {}
    for g, m in zip(groups, fits):
        for j, rss in enumerate(m.rss_trace):
            change = m.trace[j - 1] if j >= 1 else float("nan")
            trace.append((g, j, change, rss))
        reports[g] = check_equivalence(m)
    write_csv(pd.DataFrame(trace, columns=["fit", "iteration", "sup_change", "rss"]),
              out / "trace.csv", cfg)
    lines = [header_line(cfg)] + [f"{g}: {rep}" for g, rep in reports.items()]
    (out / "equivalence.txt").write_text("\n".join(lines) + "\n")
    manifest = {
        "tool": "climort", "version": __version__, "bundle_format": 1,
        "variant": model._variant, "seed": cfg.seed, "config_hash": cfg.digest(),
        "config": cfg.as_dict(), "ages": list(panel.ages), "regions": list(panel.regions),
        "first_year": panel.first_year, "n_weeks": panel.n_weeks,
        "fits": {g: {"r": m.n_iter, "converged": m.converged, "trace": list(m.trace),
                     "rss": list(m.rss_trace)} for g, m in zip(groups, fits)},
        "equivalence": {g: {"max_abs_diff": rep.max_abs_diff, "passed": rep.passed,
                            "worst_cell": list(rep.worst_cell), "worst_coef": rep.worst_coef}
                        for g, rep in reports.items()},
        "knots": [{"exposure": tr.exposure_basis_.knots.tolist(), "lag": tr.lag_basis_.knots.tolist()}
                  for tr in model.transformers_],
        "index_models": {n: {"model": im.name, "drift": im.drift, "sigma2": im.sigma2,
                             "lags": list(im.lags), "phi": list(im.phi), "fallback": im.fallback}
                         for n, im in model.index_models_.items()},
    }
    write_json(manifest, out / "manifest.json")
    for g, rep in reports.items():
        print(f"{g}: r={manifest['fits'][g]['r']} {rep}")
    return 0


def cmd_curves(cfg: RunConfig) -> int:
    out = Path(cfg.output)
    panel, _, _, model = fit_from_config(cfg)
    curves, slices = [], []
    for i, r in enumerate(panel.regions):
        for x, a in enumerate(panel.ages):
            f = model.cell_fit(x, i)
            df = overall_cumulative_curve(f).to_frame()
            df.insert(0, "age_group", a)
            df.insert(0, "region", r)
            curves.append(df)
            for u in LAG_SLICE_UTCI:
                s = lag_slice(f, u).to_frame("lag")
                s.insert(0, "utci", u)
                s.insert(0, "age_group", a)
                s.insert(0, "region", r)
                slices.append(s)
    write_csv(pd.concat(curves, ignore_index=True), out / "curves.csv", cfg)
    write_csv(pd.concat(slices, ignore_index=True), out / "lag_slices.csv", cfg)
    return 0


def cmd_loadings(cfg: RunConfig) -> int:
    out = Path(cfg.output)
    panel, _, _, model = fit_from_config(cfg)
    cl = model.climate_loading()
    write_csv(cl.to_frame(), out / "loadings.csv", cfg)
    recs = []
    years = sorted({y for y, _ in cl.weeks})
    for i, r in enumerate(panel.regions):
        for x, a in enumerate(panel.ages):
            for k in range(cl.annual.shape[1]):
                recs.append((r, a, years[k], cl.annual[x, k, i]))
    write_csv(pd.DataFrame(recs, columns=["region", "age_group", "year", "theta_annual"]),
              out / "loadings_annual.csv", cfg)
    return 0


def cmd_cv(cfg: RunConfig) -> int:
    out = Path(cfg.output)
    panel = load_panel(cfg)
    _, climate = load_climate(cfg, panel)
    plan = CvPlan(cfg.cv_initial, cfg.cv_step, cfg.cv_horizon, cfg.cv_folds, cfg.cv_shift_first_fold)
    plan.check(panel.n_weeks)
    models = {cfg.variant: build_model(cfg, use_climate=False),
              f"dlnm-{cfg.variant}": build_model(cfg)}
    table = run_cv(panel, climate, models, plan)
    write_csv(table, out / "cv.csv", cfg)
    print(table.pivot_table(index=["region", "age_group"], columns="model",
                            values="mae_x100").to_string(float_format="%.4f"))
    return 0


def cmd_project(cfg: RunConfig) -> int:
    out = Path(cfg.output)
    if not cfg.scenario:
        raise InputError("no scenario file configured (set scenario = PATH or --scenario)")
    panel, raw, _, model = fit_from_config(cfg)
    scen_raw = read_scenario_csv(cfg.scenario)
    missing = [r for r in panel.regions if r not in scen_raw]
    if missing:
        raise InputError(f"{cfg.scenario}: no scenario for region(s) {', '.join(missing)}")
    scen = [scenario_series(scen_raw[r], cfg.lag_max, raw[r]) for r in panel.regions]
    weeks = {s.n_weeks for s in scen}
    if len(weeks) != 1:
        raise InputError(f"{cfg.scenario}: regions cover different numbers of weeks {sorted(weeks)}")
    horizon = weeks.pop()
    annual = horizon % WEEKS_PER_YEAR == 0
    fan = project(model, scen, n_paths=cfg.n_paths, seed=cfg.seed, offset=cfg.offset,
                  annual=annual, n_boot=cfg.n_boot)
    write_csv(fan.to_frame(), out / "projection.csv", cfg)
    if annual:
        write_csv(fan.annual_frame(), out / "projection_annual.csv", cfg)
    return 0


def cmd_synth(cfg: RunConfig) -> int:
    out = Path(cfg.output)
    scfg = SynthConfig(n_regions=cfg.synth_regions, n_weeks=cfg.synth_weeks,
                       noise_sd=cfg.synth_noise, structure=cfg.synth_structure,
                       lag_max=cfg.lag_max, exposure_df=cfg.exposure_df, lag_df=cfg.lag_df,
                       seed=cfg.seed)
    data = generate(scfg)
    deaths, pop = panel_tables(data.panel)
    write_csv(deaths, out / "deaths.csv", cfg)
    write_csv(pop, out / "population.csv", cfg)
    write_csv(climate_table(data.climate), out / "climate.csv", cfg)

    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(1)[0])
    horizon = WEEKS_PER_YEAR * cfg.synth_scenario_years
    start = DAYS_PER_WEEK * scfg.n_weeks
    scen = [synthetic_climate(horizon, 0, scfg.region_offsets[i % len(scfg.region_offsets)], rng,
                              scfg.climate_scale, scfg.first_year, r, start, cfg.synth_warming)
            for i, r in enumerate(data.panel.regions)]
    write_csv(climate_table(scen), out / "scenario.csv", cfg)

    for name, df in truth_tables(data).items():
        df = df if isinstance(df.index, pd.RangeIndex) else df.reset_index()
        write_csv(df, out / "truth" / f"{name}.csv", cfg)
    write_json({
        "tool": "climort", "version": __version__, "seed": cfg.seed,
        "generator": dataclasses.asdict(scfg), "n_weeks": scfg.n_weeks,
        "regions": list(data.panel.regions), "ages": list(data.panel.ages),
        "climate_days_per_region": int(len(data.climate[0])),
        "padding_days": required_padding(scfg.lag_max),
        "scenario_days_per_region": int(len(scen[0])),
    }, out / "truth" / "manifest.json")

    run = dataclasses.replace(cfg, deaths="deaths.csv", population="population.csv",
                              climate="climate.csv", scenario="scenario.csv",
                              output="results", climate_cadence="daily")
    write_config(run, out / "run.cfg")
    print(f"wrote synthetic data to {out} (seed {cfg.seed})")
    return 0


HANDLERS = {"fit": cmd_fit, "curves": cmd_curves, "loadings": cmd_loadings,
            "cv": cmd_cv, "project": cmd_project, "synth": cmd_synth}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="climort", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"climort {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    helps = {
        "fit": "backfit the model and write the parameter bundle",
        "curves": "overall cumulative RR curves and lag slices",
        "loadings": "weekly and annual climate loadings",
        "cv": "expanding-window cross-validation against the baseline",
        "project": "Monte Carlo projection under a climate scenario",
        "synth": "write a synthetic dataset with known parameters",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", "-c", help="key = value config file")
        p.add_argument("-v", "--verbose", action="store_true")
        for f in dataclasses.fields(RunConfig):
            flag = "--" + f.name.replace("_", "-")
            p.add_argument(flag, dest=f.name, default=None, metavar=f.name.upper())
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {f.name: getattr(args, f.name) for f in dataclasses.fields(RunConfig)}
    warnings.simplefilter("default")
    try:
        cfg = load_config(args.config, overrides)
        log.info("seed %s, config %s", cfg.seed, cfg.digest())
        return HANDLERS[args.command](cfg)
    except InputError as exc:
        print(f"climort: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"climort: error: {exc}", file=sys.stderr)
        return 2
    except ModelError as exc:
        print(f"climort: model failure: {exc}", file=sys.stderr)
        return 1
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"climort: numerical failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
