import re

import numpy as np
import pytest

_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)", report.nodeid)
    if not m:
        return
    key = (int(m.group(1)), m.group(2))
    if report.when == "call" or report.outcome != "passed":
        prev = _ACCEPTANCE.get(key)
        if prev is None or prev[0] == "passed":
            _ACCEPTANCE[key] = (report.outcome, report.duration)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for (num, name), (outcome, duration) in sorted(_ACCEPTANCE.items()):
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {num} {name}: {verdict} ({duration:.2f} s)")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
