import warnings

import numpy as np
import pytest

from overtaking.casebook import build_example1, build_example2, build_incomparable
from overtaking.strategy import StationaryStrategy


@pytest.fixture
def ex1():
    return build_example1(0.1, 0.11)


@pytest.fixture
def ex2():
    return build_example2()


@pytest.fixture
def incomparable():
    return build_incomparable()


@pytest.fixture
def ex1_a():
    return StationaryStrategy.pure({"x": "a", "y": "c", "z": "d"})


@pytest.fixture
def ex1_b():
    return StationaryStrategy.pure({"x": "b", "y": "c", "z": "d"})


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_configure(config):
    warnings.filterwarnings("error", category=RuntimeWarning, module="overtaking")


ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
