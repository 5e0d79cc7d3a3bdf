import sys

import numpy as np
import pytest

from instances import cycle_gaussian, m1_categorical, m1_gaussian

from coupled_hmt.tree import build_tree


@pytest.fixture
def m1():
    return m1_categorical()


@pytest.fixture
def m1g():
    return m1_gaussian()


@pytest.fixture
def cycle():
    return cycle_gaussian()


@pytest.fixture
def three():
    return build_tree([None, 0, 0])


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if acceptance is not None and acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in acceptance.RESULTS:
            terminalreporter.write_line(line)
