"""Acceptance suite: one test and one printed PASS/FAIL line per criterion."""

import time
import warnings

import numpy as np
import pytest

from climort.backfit import check_equivalence
from climort.data import DailyClimateSeries
from climort.estimators import DlnmLeeCarter
from climort.evaluate import CvPlan, mean_absolute_error, run_cv
from climort.exceptions import ConfigError
from climort.forecast import climate_loading, loading_from_component, project
from climort.lee_carter import fit_lc
from climort.synth import generate, synthetic_climate
from climort.waves import wave_counts

from conftest import ACCEPTANCE_LINES

SEEDS_10 = range(10)


def report(n, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def note(text):
    ACCEPTANCE_LINES.append(f"       {text}")
    print(text)


def quiet_generate(**kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return generate(**kw)


def quiet_fit(model, climate, panel):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return model.fit(climate, panel)


def acf(x, lag):
    x = np.asarray(x, float) - np.mean(x)
    return float(x[lag:] @ x[:-lag] / (x @ x))


def test_1_lc_exactness():
    rng = np.random.default_rng(1)
    a = rng.normal(-5, 1.5, 4)
    b = rng.dirichlet(np.ones(4))
    k = np.cumsum(rng.normal(-0.05, 0.3, 260))
    k -= k.mean()
    t0 = time.perf_counter()
    p, _ = fit_lc(a[:, None] + np.outer(b, k))
    elapsed = time.perf_counter() - t0
    err = max(np.abs(p.a - a).max(), np.abs(p.b - b).max(), np.abs(p.kappa - k).max())
    cons = max(abs(p.b.sum() - 1), abs(p.kappa.sum()))
    ok = err < 1e-8 and cons < 1e-10 and elapsed < 1.0
    report(1, ok, f"max parameter error {err:.2e}, constraint error {cons:.2e}, {elapsed * 1e3:.1f} ms")


def test_2_equivalence(synth, fitted_ll):
    t0 = time.perf_counter()
    model = quiet_fit(DlnmLeeCarter(), synth.climate, synth.panel)
    reps = [check_equivalence(m) for m in model.backfit_]
    elapsed = time.perf_counter() - t0
    worst = max(r.max_abs_diff for r in reps)
    converged = all(m.converged for m in model.backfit_)
    ll = check_equivalence(fitted_ll.backfit_)
    note(f"(informational) criterion 2, DLNM-LL single-refit gap {ll.max_abs_diff:.2e}")
    ok = converged and worst < 1e-6 and elapsed < 30
    report(2, ok, f"DLNM-LC max |zeta_single - sum zeta_j| = {worst:.2e} over "
                  f"{len(reps)} converged fits, {elapsed:.1f} s")


def test_3_backfit_recovery():
    t0 = time.perf_counter()
    inside = total = 0
    min_corr = 1.0
    for seed in range(100):
        d = quiet_generate(seed=seed, noise_sd=0.02)
        m = quiet_fit(DlnmLeeCarter(), d.climate, d.panel)
        for i in range(len(d.panel.regions)):
            for x in range(len(d.panel.ages)):
                f = m.cell_fit(x, i)
                dev = np.abs(f.coef - d.zeta[x, i])
                inside += int(np.sum(dev <= 3 * f.se + 1e-12))
                total += dev.size
            min_corr = min(min_corr, np.corrcoef(m.params_[i].kappa, d.kappa[:, i])[0, 1])
    elapsed = time.perf_counter() - t0
    frac = inside / total
    ok = frac >= 0.95 and min_corr > 0.98 and elapsed < 600
    report(3, ok, f"{frac:.2%} of coefficients within 3 SE over 100 runs, "
                  f"min kappa correlation {min_corr:.4f}, {elapsed:.0f} s")


def test_4_deseasonalization():
    wins = 0
    for seed in SEEDS_10:
        d = quiet_generate(seed=seed, drift=0.0, rw_sd=0.005)
        dl = quiet_fit(DlnmLeeCarter(), d.climate, d.panel)
        lc = DlnmLeeCarter(use_climate=False).fit(None, d.panel)
        wins += all(abs(acf(dl.params_[i].kappa, 52)) < abs(acf(lc.params_[i].kappa, 52))
                    for i in range(len(d.panel.regions)))
    report(4, wins >= 9, f"DLNM-LC kappa less seasonal than baseline in {wins}/10 seeds (all regions)")


def brute_force(mx, mn, pad, n_weeks):
    hwd, cwd = [], []
    for t in range(1, n_weeks + 1):
        h = c = 0
        for tau in range(7 * (t - 1) + 1, 7 * t + 1):
            i = pad + tau - 1
            h += all(mx[i - k] > 32 for k in range(3))
            c += all(mn[i - k] < -13 for k in range(3))
        hwd.append(h)
        cwd.append(c)
    return hwd, cwd


def test_5_wave_counts_oracle():
    rng = np.random.default_rng(5)
    mismatches = 0
    lo = hi = 0
    for _ in range(10_000):
        n_weeks, pad = int(rng.integers(1, 4)), 2
        n = 7 * n_weeks + pad
        mx = rng.choice([31.0, 32.0, 33.0, 40.0], n, p=[0.2, 0.1, 0.5, 0.2])
        mn = rng.choice([-20.0, -13.0, -12.0, 0.0], n, p=[0.6, 0.1, 0.1, 0.2])
        wc = wave_counts(DailyClimateSeries((mx + mn) / 2, mn, mx, pad))
        h, c = brute_force(mx, mn, pad, n_weeks)
        mismatches += int(list(wc.hwd) != h or list(wc.cwd) != c)
        lo = min(lo, wc.hwd.min(), wc.cwd.min())
        hi = max(hi, wc.hwd.max(), wc.cwd.max())
    ok = mismatches == 0 and lo >= 0 and hi <= 7
    report(5, ok, f"{mismatches} mismatches against brute force on 10000 series, counts in [{lo}, {hi}]")


def test_6_loading_identity(fitted_lc, fitted_ll):
    worst = 0.0
    for m in (fitted_lc, fitted_ll):
        L = climate_loading(m)
        worst = max(worst, float(np.abs(L.theta - (1 - np.exp(-m.climate_component_))).max()))
    zero = float(loading_from_component(np.zeros(3)).max())
    report(6, worst < 1e-12 and zero == 0.0,
           f"max |theta - (1 - exp(-S))| = {worst:.1e} on all fitted cells, theta(0) = {zero}")


def scenario_climate(model, weeks, seed, shift=0.0):
    rng = np.random.default_rng(seed)
    out = []
    for off, r in zip((0.0, -3.0, 3.0), model.regions_):
        out.append(synthetic_climate(weeks, 15, off, rng, region=r).shifted(shift))
    return out


def test_7_projection_sanity(fitted_lc):
    scen = scenario_climate(fitted_lc, 780, seed=7)
    t0 = time.perf_counter()
    flat = project(fitted_lc, scen, n_paths=10_000, seed=1, index_noise=False,
                   coef_noise=False, obs_noise=False)
    dev = float(np.abs(flat.mean - flat.point).max())
    fan = project(fitted_lc, scen, n_paths=10_000, seed=2)
    elapsed = time.perf_counter() - t0
    se = fan.log_sd / np.sqrt(fan.n_paths)
    z = np.abs(fan.log_mean - np.log(fan.point)) / se
    frac = float(np.mean(z <= 3))
    ok = dev < 1e-10 and frac >= 0.99 and elapsed < 120
    report(7, ok, f"zero-variance max deviation {dev:.1e}; {frac:.2%} of cells within 3 MC SE; "
                  f"{elapsed:.1f} s for 4x3x780x10000")


def test_8_scenario_direction(fitted_lc):
    base = scenario_climate(fitted_lc, 780, seed=8)
    warm = [c.shifted(3.0) for c in base]
    kw = dict(n_paths=2000, seed=3)
    f0, f1 = project(fitted_lc, base, **kw), project(fitted_lc, warm, **kw)
    woy = np.array([w for _, w in f0.weeks])
    summer = (woy >= 24) & (woy <= 35)
    winter = (woy <= 9) | (woy >= 49)
    up = f1.mean[:, summer].mean(axis=(1, 2)) > f0.mean[:, summer].mean(axis=(1, 2))
    down = f1.mean[:, winter].mean(axis=(1, 2)) < f0.mean[:, winter].mean(axis=(1, 2))
    ok = bool(up.all() and down.all())
    report(8, ok, f"+3 C raises summer means in {up.sum()}/4 and lowers winter means "
                  f"in {down.sum()}/4 age groups")


def test_9_cv_harness(synth):
    from test_evaluate import PerfectForesight, TrainingMean
    plan = CvPlan()
    perfect = run_cv(synth.panel, None, {"p": PerfectForesight(synth.panel.rates)}, plan)
    zero = float(perfect["mae_x100"].abs().max())
    const = run_cv(synth.panel, None, {"c": TrainingMean()}, plan)
    rates = synth.panel.rates
    worst = 0.0
    for i, r in enumerate(synth.panel.regions):
        for x, a in enumerate(synth.panel.ages):
            errs = []
            for j in range(10):
                end = 102 + 8 * j
                level = sum(rates[x, t, i] for t in range(end)) / end
                errs += [abs(rates[x, t, i] - level) for t in range(end, end + 78)]
            got = const.loc[(const.region == r) & (const.age_group == a), "mae_x100"].item()
            worst = max(worst, abs(got - 100 * sum(errs) / len(errs)))
    plan.check(260)
    try:
        plan.check(200)
        rejected, msg = False, ""
    except ConfigError as exc:
        rejected, msg = True, str(exc)
    ok = zero == 0.0 and worst < 1e-12 and rejected and "252 > T = 200" in msg
    report(9, ok, f"perfect-foresight MAE {zero}, constant-predictor oracle gap {worst:.1e}, "
                  f"T=260 accepted, T=200 rejected ({msg})")


def test_10_dlnm_advantage():
    sensitive = ("75-84", "85+")
    wins = strict = 0
    for seed in SEEDS_10:
        d = quiet_generate(seed=seed)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            df = run_cv(d.panel, d.climate, {"dlnm": DlnmLeeCarter(),
                                             "lc": DlnmLeeCarter(use_climate=False)})
        df = df[df.age_group.isin(sensitive)]
        wide = df.pivot_table(index=["region", "age_group"], columns="model", values="mae_x100")
        avg = wide.groupby(level="age_group").mean()
        wins += bool((avg["dlnm"] < avg["lc"]).all())
        strict += bool((wide["dlnm"] < wide["lc"]).all())
    note(f"(informational) criterion 10, every region separately: {strict}/10 seeds")
    report(10, wins >= 8, f"DLNM-LC lower region-averaged MAE for ages 75-84 and 85+ in {wins}/10 seeds")
