"""Shared pytest plumbing: a per-criterion verdict block for the acceptance run.

Every test in test_acceptance.py named ``test_criterion_NN_<slug>`` contributes
exactly one [PASS]/[FAIL] line to the terminal summary, so a plain ``pytest -v``
ends with a compact scoreboard of the acceptance gates.
"""

from __future__ import annotations

import re

_CRITERION = re.compile(r"test_acceptance\.py::test_criterion_(\d+)_([a-z0-9_]+)")

_results: dict[int, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    match = _CRITERION.search(report.nodeid)
    if match is None:
        return
    number = int(match.group(1))
    label = match.group(2).replace("_", " ")
    if report.when == "call":
        verdict = "PASS" if report.passed else "FAIL"
        _results[number] = (verdict, label)
    elif report.when == "setup" and not report.passed:
        # fixture error or skip counts as a failed gate, not a silent omission
        _results[number] = ("FAIL", label)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_results):
        verdict, label = _results[number]
        terminalreporter.write_line(f"[{verdict}] criterion {number:2d}: {label}")
