import numpy as np
import pytest

from dppreg import EllipticityParams, Interval, Disk, build_region

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def params_1d():
    return EllipticityParams(0.5, 0.5, 1.0, 0.2)


@pytest.fixture
def region_1d(params_1d):
    return build_region(1, Interval(0.0, 1.0), 0.05, params_1d)


@pytest.fixture
def params_2d():
    return EllipticityParams(0.5, 0.5, 1.0, 0.1)


@pytest.fixture
def region_2d(params_2d):
    return build_region(2, Disk((0.0, 0.0), 0.4), 0.05, params_2d)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
