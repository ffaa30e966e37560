"""Shared pytest wiring.

Tests marked ``@pytest.mark.criterion("AC07", "text")`` are collected into a
pass/fail table printed at the end of the run.
"""
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    code, text = marker.args
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        detail = ""
        if report.failed and call.excinfo is not None:
            detail = call.excinfo.exconly().splitlines()[0][:160]
        _criteria[code] = (text, report.outcome, detail)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for code in sorted(_criteria):
        text, outcome, detail = _criteria[code]
        status = "PASS" if outcome == "passed" else "FAIL"
        line = f"{code} {status} {text}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)
