import pytest

from sqaxx.model import build_problem


@pytest.fixture
def single_bond():
    return build_problem(2, "edge-list", [(0, 1, 1.0)])


@pytest.fixture
def ring3():
    return build_problem(3, "ring", 1.0)


@pytest.fixture
def ring4():
    return build_problem(4, "ring", 1.0)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import ACCEPTANCE_LINES
    except ImportError:
        return
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
