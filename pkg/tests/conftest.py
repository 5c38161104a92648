import pytest


def pytest_configure(config):
    config._acceptance_lines = {}


@pytest.fixture
def record(request):
    """Store one pass/fail line per acceptance criterion for the terminal summary."""
    lines = request.config._acceptance_lines

    def _record(number, title, passed, detail):
        lines[number] = f"[{'PASS' if passed else 'FAIL'}] {number:2d}. {title}: {detail}"
        return passed

    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", {})
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(lines):
        terminalreporter.write_line(lines[k])
