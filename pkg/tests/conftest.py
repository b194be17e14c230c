import pytest

_ACCEPTANCE_LINES = {}


@pytest.fixture
def acceptance_report(request):
    """Record one summary line per acceptance criterion."""
    def report(number, title, passed, detail):
        tag = "PASS" if passed else "FAIL"
        _ACCEPTANCE_LINES[number] = f"[{tag}] criterion {number} ({title}): {detail}"
        print(_ACCEPTANCE_LINES[number])
    return report


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE_LINES):
        terminalreporter.write_line(_ACCEPTANCE_LINES[number])
