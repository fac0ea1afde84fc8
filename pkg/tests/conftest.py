import warnings

import numpy as np
import pytest
from hypothesis import settings

from climort.data import DailyClimateSeries
from climort.estimators import DlnmLeeCarter, DlnmLiLee
from climort.synth import generate

settings.register_profile("ci", max_examples=60, deadline=None)
settings.load_profile("ci")


def make_climate(n_weeks=60, pad=15, seed=0, offset=0.0, region="R"):
    rng = np.random.default_rng(seed)
    n = 7 * n_weeks + pad
    day = np.arange(n) - pad
    mean = 12 + 14 * np.sin(2 * np.pi * (day - 110) / 365.25) + 4 * rng.standard_normal(n) + offset
    return DailyClimateSeries(mean, mean - 8 - rng.random(n), mean + 8 + rng.random(n), pad, region)


@pytest.fixture(scope="session")
def synth():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return generate(seed=0)


@pytest.fixture(scope="session")
def fitted_lc(synth):
    return DlnmLeeCarter().fit(synth.climate, synth.panel)


@pytest.fixture(scope="session")
def fitted_ll(synth):
    return DlnmLiLee().fit(synth.climate, synth.panel)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
