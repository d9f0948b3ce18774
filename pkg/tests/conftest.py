import pytest

CRITERIA = {}


@pytest.fixture
def criterion():
    """Record the outcome of an acceptance criterion for the closing summary."""
    def record(number, passed, detail):
        CRITERIA[number] = (bool(passed), detail)
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
        return bool(passed)
    return record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        ok, detail = CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
