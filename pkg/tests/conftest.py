import numpy as np
import pytest
import torch

from pfncast.model import ModelConfig, PFNModel
from pfncast.prior import PriorHyperparams, generate_series, make_tasks, random_start, series_rng
from pfncast.series import DatedSeries
from pfncast.timebase import make_date


def synthetic_tasks(n_series=4, length=60, window=12, seed=0, freq="daily", noise=1.0):
    tasks = []
    for i in range(n_series):
        rng = series_rng(seed, i)
        s = generate_series(PriorHyperparams(m_noise_scale=noise), freq, random_start_for(freq, rng), length, rng)
        tasks += make_tasks(s, window, 10, rng)
    return tasks


def random_start_for(freq, rng):
    from pfncast.timebase import Frequency

    return random_start(Frequency(freq), rng)


def daily_series(values, start=make_date(2021, 3, 1)):
    from pfncast.timebase import date_add

    values = np.asarray(values, dtype=np.float64)
    return DatedSeries([date_add(start, i, "daily") for i in range(len(values))], values)


@pytest.fixture
def small_model():
    return PFNModel(ModelConfig(d_model=8), seed=3).double()


@pytest.fixture(autouse=True)
def _single_thread():
    torch.set_num_threads(1)
    yield


_criteria = []


def pytest_runtest_logreport(report):
    if "test_acceptance.py" in report.nodeid and "::test_criterion_" in report.nodeid:
        if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
            name = report.nodeid.split("::test_criterion_")[1]
            _criteria.append((name, report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _criteria:
        number, _, label = name.partition("_")
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {number:<3} {verdict}  {label.replace('_', ' ')}")
