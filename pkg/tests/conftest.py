import numpy as np
import pytest
from hypothesis import settings

from crsim.model import Administrative, ModelParams

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

MARGIN = (ModelParams([0.0023, 0.0011, 0.0004]), ModelParams([0.0008, 0.0026, 0.0019]))
ADM90 = Administrative(90.0)


@pytest.fixture
def margin():
    return MARGIN


@pytest.fixture
def adm90():
    return ADM90


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def cohort_from_stats(events, censored, total_time, k=None, label=1):
    """A cohort with the given per-cause counts, censored count and total time."""
    from crsim.simulate import Cohort
    events = list(events)
    k = k or len(events)
    states = [j + 1 for j, c in enumerate(events) for _ in range(c)] + [0] * censored
    n = len(states)
    return Cohort(np.full(n, total_time / n), states, k=k, label=label)


_CELLS = {}


def cached_cell(name, censoring, n1=200, n2=200, measure="prob", n_sim=300, B=300, seed=0):
    """``run_scenario`` memoized for the session; the study and acceptance suites share cells."""
    from crsim.study import get_scenario, run_scenario
    key = (name, censoring, n1, n2, measure, n_sim, B, seed)
    if key not in _CELLS:
        _CELLS[key] = run_scenario(get_scenario(name, censoring), n1, n2, n_sim=n_sim, B=B,
                                   measure=measure, seed=seed)
    return _CELLS[key]


_ACCEPTANCE_LINES = []


@pytest.fixture
def report_line(capsys):
    """Print one pass/fail line for an acceptance criterion, inline and in the final summary."""
    def emit(number, ok, detail):
        line = f"CRITERION {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok
    return emit


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
