import pytest

_LINES_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LINES_KEY] = []


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per acceptance criterion and assert on it."""
    lines = request.config.stash[_LINES_KEY]

    def record(number, title, checks):
        ok = all(c[1] for c in checks)
        detail = "; ".join(f"{name}: {'ok' if good else 'FAILED'} ({info})"
                           for name, good, info in checks)
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title} | {detail}"
        lines.append((number, line))
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES_KEY, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(lines):
        terminalreporter.write_line(line)
