import numpy as np
import pytest

from activesplit.grid import GridSpec, RealField, to_spectral

ACCEPTANCE_LINES: list[str] = []


def spectral(grid, values):
    return to_spectral(RealField(grid, values))


@pytest.fixture
def grid1():
    return GridSpec(1, 16)


@pytest.fixture
def grid256():
    return GridSpec(1, 256)


@pytest.fixture
def sin_x256(grid256):
    (x,) = grid256.coordinates()
    return spectral(grid256, np.sin(x))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
