import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from facegrowth import synthgen
from facegrowth.data_model import LandmarkSchema
from facegrowth.pipeline import prepare

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def schema():
    return LandmarkSchema.default()


@pytest.fixture(scope="session")
def small_cohort():
    return synthgen.generate(synthgen.SynthConfig(n_patients=40, seed=3))


@pytest.fixture(scope="session")
def full_cohort():
    return synthgen.generate(synthgen.SynthConfig(n_patients=639, seed=7))


@pytest.fixture(scope="session")
def small_prepared(small_cohort):
    return prepare(small_cohort)


@pytest.fixture(scope="session")
def full_prepared(full_cohort):
    return prepare(full_cohort)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance bookkeeping: one PASS/FAIL line per criterion in the terminal summary
_CRITERIA: dict[int, list[tuple[str, str, str]]] = {}
_NOTES: dict[str, list[str]] = {}


@pytest.fixture
def note(request):
    """Attach a short measured value to the current test's acceptance line."""
    def add(text):
        _NOTES.setdefault(request.node.nodeid, []).append(str(text))
    return add


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if call.when == "call" or (call.when == "setup" and call.excinfo is not None):
        outcome = "FAIL" if call.excinfo is not None else "PASS"
        if call.excinfo is not None and call.excinfo.errisinstance(pytest.skip.Exception):
            outcome = "SKIP"
        _CRITERIA.setdefault(marker.args[0], []).append((item.name, outcome, item.nodeid))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        results = _CRITERIA[n]
        outcomes = {o for _, o, _ in results}
        overall = "FAIL" if "FAIL" in outcomes else "PASS" if "PASS" in outcomes else "SKIP"
        parts = []
        for name, o, nodeid in results:
            extra = "; ".join(_NOTES.get(nodeid, []))
            parts.append(f"{name}={o}" + (f" ({extra})" if extra else ""))
        tr.write_line(f"criterion {n:>2}: {overall}  " + ", ".join(parts))
