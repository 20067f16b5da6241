import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

_criteria = {}


def pytest_runtest_logreport(report):
    crit = getattr(report, "_criterion", None)
    if crit is None:
        return
    number, title = crit
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        if report.skipped:
            outcome = "SKIP"
        elif report.passed:
            outcome = "PASS"
        else:
            outcome = "FAIL"
        prev = _criteria.get(number, (title, "PASS"))[1]
        rank = {"FAIL": 2, "SKIP": 1, "PASS": 0}
        _criteria[number] = (title, outcome if rank[outcome] >= rank[prev] else prev)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is not None:
        rep._criterion = (mark.args[0], mark.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, outcome = _criteria[number]
        terminalreporter.write_line(f"criterion {number:>2}: {outcome:<4} {title}")
