import numpy as np
import pytest

from traknn.field_store import FieldSequence


def random_seq(n, h, w, seed=0, scale=1.0, dtype=np.float64):
    rng = np.random.default_rng(seed)
    return FieldSequence((scale * rng.standard_normal((n, h, w))).astype(dtype))


@pytest.fixture
def scalar3():
    """Three 1x1 fields [0], [1], [3]."""
    return FieldSequence(np.array([0.0, 1.0, 3.0]).reshape(3, 1, 1))


@pytest.fixture
def scalar3_S():
    return np.array([[0.0, 1.0, 9.0], [1.0, 0.0, 4.0], [9.0, 4.0, 0.0]])


# ---------------------------------------------------------------- acceptance summary

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(num, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    num, title = marker.args
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[rep.outcome]
        _CRITERIA[num] = (title, status, getattr(item, "detail", ""))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        title, status, detail = _CRITERIA[num]
        line = f"[{status}] C{num:<2} {title}"
        if detail:
            line += f" -- {detail}"
        terminalreporter.write_line(line)
