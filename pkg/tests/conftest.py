import sys
from pathlib import Path

import numpy as np
import pytest

HERE = Path(__file__).parent
DATA = HERE / "data"
CORPUS = DATA / "corpus"

sys.path.insert(0, str(HERE))

from gazekit.model import DisplayGeometry, Recording  # noqa: E402

GEOMETRY = DisplayGeometry(530.0, 298.125, 1920, 1080, 600.0)

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by a test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    state = _CRITERIA.setdefault(number, {"title": title, "passed": True, "ran": False})
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        state["ran"] = True
        if report.outcome != "passed":
            state["passed"] = False


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        state = _CRITERIA[number]
        verdict = "PASS" if state["passed"] and state["ran"] else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {verdict}  {state['title']}")


def make_recording(x, y, rate=1000.0, valid=None, geometry=GEOMETRY, pupil=None, t=None):
    """Recording from gaze coordinate lists; NaN or ``valid=False`` marks lost samples."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(x)
    if t is None:
        t = np.rint(np.arange(n) * 1e6 / rate).astype(np.int64)
    if valid is None:
        valid = ~(np.isnan(x) | np.isnan(y))
    valid = np.asarray(valid, dtype=bool)
    p = np.full(n, 3.0) if pupil is None else np.asarray(pupil, dtype=float)
    return Recording(
        t=np.asarray(t, dtype=np.int64), x=x, y=y, pupil_left=p, pupil_right=p.copy(),
        valid_left=valid, valid_right=valid.copy(), sampling_rate_hz=rate, geometry=geometry,
    )


@pytest.fixture
def corpus_dir():
    return CORPUS


@pytest.fixture
def corpus_config():
    return DATA / "corpus.ini"
