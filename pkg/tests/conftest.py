"""Shared pytest configuration: a one-line PASS/FAIL summary per acceptance criterion."""

from __future__ import annotations

import pytest

_ACCEPTANCE: dict[str, tuple[str, str]] = {}


def pytest_runtest_logreport(report: pytest.TestReport) -> None:
    if "acceptance" not in report.keywords:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        name = report.nodeid.split("::")[-1]
        doc = getattr(report, "criterion", name)
        _ACCEPTANCE[report.nodeid] = ("PASS" if report.passed else "FAIL", doc)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item: pytest.Item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        report.criterion = marker.args[0]


def pytest_terminal_summary(terminalreporter, exitstatus, config) -> None:
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for status, label in _ACCEPTANCE.values():
        terminalreporter.write_line(f"{status}  {label}")
