import pytest

_LINES: list[str] = []


@pytest.fixture(scope="session")
def criterion():
    """Record one PASS/FAIL line per checked criterion and assert it."""

    def check(tag: str, ok: bool, detail: str):
        line = f"{'PASS' if ok else 'FAIL'}  {tag}: {detail}"
        _LINES.append(line)
        print(line)
        assert ok, line

    return check


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
