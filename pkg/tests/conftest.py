import pytest

from pars import GaussianTarget, NakagamiTarget

ACCEPTANCE_LINES = []


@pytest.fixture
def nakagami():
    return NakagamiTarget(1.2, 2.0)


@pytest.fixture
def gaussian():
    return GaussianTarget(0.0, 1.0)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
