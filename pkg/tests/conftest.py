import pytest

ACCEPTANCE_LINES = {}


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line for an acceptance criterion."""

    def record(number, title, passed, detail, seconds=None):
        tag = "PASS" if passed else "FAIL"
        timing = "" if seconds is None else f" [{seconds:.2f} s]"
        ACCEPTANCE_LINES[number] = f"criterion {number:>2} {tag}  {title}: {detail}{timing}"
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
