import numpy as np
import pytest

from emlb.fields import Grid, PhysicalParams


@pytest.fixture
def grid32():
    return Grid(2, 32)


@pytest.fixture
def grid64():
    return Grid(2, 64)


@pytest.fixture
def params():
    return PhysicalParams()


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
