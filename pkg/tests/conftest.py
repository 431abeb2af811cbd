import sys

import numpy as np
import pytest

from edspec import galerkin
from edspec.orthopoly import build_recurrence
from edspec.weight import WeightSpec


@pytest.fixture(scope="session")
def full_table():
    return build_recurrence(WeightSpec(2), 65)


@pytest.fixture(scope="session")
def full_op(full_table):
    return galerkin.assemble(full_table, 64)


@pytest.fixture(scope="session")
def small_trunc_op():
    return galerkin.build_operator(WeightSpec(2, 10.0), 8)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def ref_example1():
    from edspec.reference import build_reference
    return build_reference(lambda x: x, 400)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
