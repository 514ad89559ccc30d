import pytest

from nvdecohere import FieldVector, NoiseParams, PhysicalConstants, ZfsParams

ACCEPTANCE_LINES = []


@pytest.fixture
def zfs():
    return ZfsParams(2870.0, 4.85)


@pytest.fixture
def consts():
    return PhysicalConstants(2.8025)


@pytest.fixture
def bath():
    return NoiseParams((0.7, 0.7, 0.7), 0.05)


@pytest.fixture
def b_par():
    return FieldVector(0.0, 0.0, 25.0)


@pytest.fixture
def b_perp():
    return FieldVector(25.0, 0.0, 0.0)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
