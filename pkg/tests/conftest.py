"""Shared test plumbing: a per-check verdict line echoed after the run."""

import pytest

_LINES = []


@pytest.fixture
def verdict():
    """Record and print one pass/fail line for a named acceptance check."""
    def record(label: str, ok: bool, detail: str) -> bool:
        line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"
        _LINES.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _LINES:
        terminalreporter.section("acceptance verdicts")
        for line in _LINES:
            terminalreporter.write_line(line)
