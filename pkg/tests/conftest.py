import pytest

_VERDICTS = []


@pytest.fixture
def verdict():
    """Record one acceptance line, then fail the test if it did not pass."""

    def record(number, ok, detail=""):
        line = f"acceptance {number:<3} {'PASS' if ok else 'FAIL'}  {detail}".rstrip()
        _VERDICTS.append((number, line))
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for _, line in _VERDICTS:
            terminalreporter.write_line(line)
