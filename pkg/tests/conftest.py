import pytest

acceptance_lines = []


@pytest.fixture
def verdict_sink():
    """Collector for end-to-end verdict lines, replayed after the run."""
    return acceptance_lines.append


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if acceptance_lines:
        terminalreporter.section("acceptance verdicts")
        for line in acceptance_lines:
            terminalreporter.write_line(line)
