import pytest

# (criterion, status, detail) lines filled in by test_acceptance.py
ACCEPTANCE_RESULTS: list[tuple[str, str, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, status, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{status:4s}  {name}: {detail}")


@pytest.fixture
def acceptance():
    return ACCEPTANCE_RESULTS
