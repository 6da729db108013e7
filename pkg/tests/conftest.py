import pytest

from cylinder_ust.graph import build

ACCEPTANCE_RESULTS = []


@pytest.fixture
def prism():
    return build(3, 2, False)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(line)
