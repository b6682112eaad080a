"""Shared fixtures and the acceptance-criteria report hook."""

import pytest

_ACCEPTANCE_LINES = []


class AcceptanceReport:
    """Collects one pass/fail line per acceptance criterion and asserts it."""

    def check(self, num: int, desc: str, ok: bool, detail: str = ""):
        status = "PASS" if ok else "FAIL"
        line = f"[{status}] criterion {num:2d}: {desc}"
        if detail:
            line += f"  [{detail}]"
        _ACCEPTANCE_LINES.append((num, line))
        print(line)
        assert ok, line


@pytest.fixture(scope="session")
def acceptance() -> AcceptanceReport:
    return AcceptanceReport()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
