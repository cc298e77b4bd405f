import numpy as np
import pytest

from goalrec.core import GoalSpec
from goalrec.envs import GridWorld, GridWorldSpec, PointReach, PointReachSpec


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def grid5():
    return GridWorld(GridWorldSpec(5, 5, start=(0, 4, 1), max_steps=40, name="grid5"))


@pytest.fixture
def reach2():
    return PointReach(PointReachSpec(dim=2, start=(0.5, 0.2), name="reach2"))


def goal(gid, *target, tol=0.0):
    return GoalSpec(gid, list(target), tol)


def pytest_terminal_summary(terminalreporter):
    try:
        import test_acceptance
    except ImportError:
        return
    if test_acceptance.REPORT:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.REPORT:
            terminalreporter.write_line(line)
