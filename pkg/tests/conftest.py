import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ordgrade import _kernels_py  # noqa: E402

try:
    from ordgrade import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

BACKENDS = [pytest.param(_kernels_py, id="python")]
if _compiled is not None:
    BACKENDS.append(pytest.param(_compiled, id="compiled"))


@pytest.fixture(params=BACKENDS)
def kernel_module(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# acceptance criteria: each test carries @pytest.mark.criterion(n, "title") and
# the terminal summary prints one PASS/FAIL line per criterion
_criteria: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when not in ("setup", "call"):
        return
    if report.when == "setup" and report.passed:
        return
    number, title = marker.args
    entry = _criteria.setdefault(number, {"title": title, "failed": []})
    if not report.passed:
        entry["failed"].append(item.name)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        entry = _criteria[number]
        status = "FAIL" if entry["failed"] else "PASS"
        detail = f"  (failed: {', '.join(entry['failed'])})" if entry["failed"] else ""
        terminalreporter.write_line(f"criterion {number:>2} {status}  {entry['title']}{detail}")
