import pytest

_VERDICTS = {}


@pytest.fixture
def verdict():
    """Record a criterion outcome, then assert it."""

    def record(number, title, ok, detail=""):
        _VERDICTS[number] = (title, bool(ok), detail)
        print(f"CRITERION {number:2d} {'PASS' if ok else 'FAIL'}  {title}  {detail}")
        assert ok, f"criterion {number} ({title}) failed: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_VERDICTS):
        title, ok, detail = _VERDICTS[number]
        terminalreporter.write_line(f"CRITERION {number:2d} {'PASS' if ok else 'FAIL'}  {title}  {detail}")
