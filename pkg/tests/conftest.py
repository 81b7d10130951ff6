import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import pytest

_LINES_KEY = "_acceptance_lines"


@pytest.fixture(scope="session")
def criterion(request):
    """Record and echo one pass/fail line per acceptance criterion."""
    config = request.config
    lines = getattr(config, _LINES_KEY, None)
    if lines is None:
        lines = []
        setattr(config, _LINES_KEY, lines)
    reporter = config.pluginmanager.get_plugin("terminalreporter")

    def emit(number, ok, detail):
        line = f"CRITERION {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append(line)
        if reporter is not None:
            reporter.write_line("")
            reporter.write_line(line)

    return emit


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, _LINES_KEY, None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda l: int(l.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
