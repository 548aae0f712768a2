import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def report_line():
    """Record one acceptance line; all lines are echoed in the terminal summary."""

    def add(label, passed, detail):
        line = f"{label}: {'PASS' if passed else 'FAIL'} ({detail})"
        ACCEPTANCE_LINES.append(line)
        print(line)

    return add


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
