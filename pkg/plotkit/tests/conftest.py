import pytest

# Mirrors the primary suite's report hook: one line for the plotting
# criterion, echoed after the run.
SECONDARY_LINES = []


def pytest_terminal_summary(terminalreporter):
    if SECONDARY_LINES:
        terminalreporter.section("acceptance criteria (secondary)")
        for line in SECONDARY_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def secondary_report():
    return SECONDARY_LINES
