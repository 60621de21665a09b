import pytest

_LINES = []


@pytest.fixture
def verdict():
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
