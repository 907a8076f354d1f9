import pytest

_LINES = pytest.StashKey[list]()


@pytest.fixture
def report(request):
    """Record one PASS/FAIL line; the lines are repeated in the terminal summary."""
    lines = request.config.stash.setdefault(_LINES, [])

    def _report(number: int, name: str, ok: bool, detail: str) -> None:
        line = f"criterion {number} {'PASS' if ok else 'FAIL'}: {name} ({detail})"
        print(line)
        lines.append((number, line))

    return _report


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
