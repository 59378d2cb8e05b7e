import pytest

CRITERION_LINES = []


@pytest.fixture
def criterion_report():
    """One pass/fail line per acceptance criterion, echoed both into the
    test's captured output and into the terminal summary."""

    def _report(num: int, ok: bool, detail: str = ""):
        status = "PASS" if ok else "FAIL"
        line = f"criterion {num:02d}: {status}" + (f" - {detail}" if detail else "")
        CRITERION_LINES.append(line)
        print(line)
        assert ok, line

    return _report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in CRITERION_LINES:
            terminalreporter.write_line(line)
