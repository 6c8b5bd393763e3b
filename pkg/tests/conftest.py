"""Shared pytest hooks: per-criterion summary lines for the acceptance suite.

Tests named ``test_criterion_<NN>_<label>`` (in ``test_acceptance.py``) are
collected into a registry; at the end of the run one PASS/FAIL line is printed
for each criterion, optionally carrying a short note set by the test itself
(for criteria that must report measured numbers).
"""

import re

import pytest

_CRITERION_PAT = re.compile(r"test_criterion_(\d+)_(\w+)")

_results: dict = {}
_notes: dict = {}


@pytest.fixture
def acceptance_notes():
    """Setter used by acceptance tests to attach numbers to their summary line."""

    def _set(number: int, text: str) -> None:
        _notes[number] = text

    return _set


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    match = _CRITERION_PAT.match(item.name.split("[")[0])
    if match is None:
        return
    number = int(match.group(1))
    label = match.group(2).replace("_", " ")
    if report.when == "call":
        _results[(number, label)] = report.outcome
    elif report.failed:  # setup/teardown error counts as a failure
        _results[(number, label)] = "failed"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for number, label in sorted(_results):
        verdict = "PASS" if _results[(number, label)] == "passed" else "FAIL"
        note = _notes.get(number)
        suffix = f"  [{note}]" if note else ""
        terminalreporter.write_line(
            f"criterion {number:2d} ({label}): {verdict}{suffix}"
        )
