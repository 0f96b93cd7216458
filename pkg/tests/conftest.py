import numpy as np
import pytest

from darksoliton.grid import Grid

ACCEPTANCE_LINES = {}


@pytest.fixture(scope="session")
def g60():
    return Grid(60.0, 1024)


@pytest.fixture(scope="session")
def g40():
    return Grid(40.0, 512)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
