import os
import sys
from collections import defaultdict

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

_criteria = defaultdict(list)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion exercised by the test")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(autouse=True)
def _tag_criterion(request, record_property):
    mark = request.node.get_closest_marker("criterion")
    if mark is not None:
        record_property("criterion", mark.args[0])


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    num = dict(report.user_properties).get("criterion")
    if num is not None:
        _criteria[num].append((report.nodeid.split("::")[-1], report.outcome, report.user_properties))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num in sorted(_criteria):
        runs = _criteria[num]
        ok = all(outcome == "passed" for _, outcome, _ in runs)
        tr.write_line(f"criterion {num}: {'PASS' if ok else 'FAIL'} ({len(runs)} checks)")
        for name, outcome, props in runs:
            for key, value in props:
                if key != "criterion":
                    tr.write_line(f"    {name} {key}: {value}")
