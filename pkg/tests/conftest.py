"""
Shared fixtures: algebroids, problems and reference controls used across the suite
"""

from pathlib import Path

import numpy as np
import pytest

from algoc.components.problems import lqr_problem, pendulum_problem, quadratic_problem, two_axis_problem
from algoc.services.algebroid import (
    chaplygin_algebroid,
    circle_bundle,
    deformed_so3_algebra,
    se2_algebra,
    skew_plane,
    so3_algebra,
    tangent_algebroid,
)
from algoc.services.dynamics import PiecewiseControl

SCENARIO_DIR = Path(__file__).resolve().parents[1] / "config" / "scenarios"


@pytest.fixture
def scenario_dir():
    return SCENARIO_DIR


@pytest.fixture
def tangent2():
    return tangent_algebroid(2)


@pytest.fixture
def tangent1():
    return tangent_algebroid(1)


@pytest.fixture
def se2():
    return se2_algebra()


@pytest.fixture
def so3():
    return so3_algebra()


@pytest.fixture
def so3_deformed():
    return deformed_so3_algebra(1.0)


@pytest.fixture
def plane():
    return skew_plane(1.0)


@pytest.fixture
def chaplygin():
    return chaplygin_algebroid()


@pytest.fixture
def charged_plane():
    return circle_bundle(1.0)


@pytest.fixture
def pendulum(tangent2):
    return pendulum_problem(tangent2, bound=1.0, resolution=3)


@pytest.fixture
def bang_control():
    """u = 1 on [0, 1.2], u = -1 on (1.2, 3]"""
    return PiecewiseControl(np.array([0.0, 1.2, 3.0]), np.array([[1.0], [-1.0]]))


@pytest.fixture
def lqr(tangent1):
    return lqr_problem(tangent1, a=0.5, q=1.0, r=1.0)


@pytest.fixture
def two_axis(so3):
    return two_axis_problem(so3, a=[0.0, 0.0, 1.0], b=[1.0, 0.0, 0.0], U=[-1.0, 1.0])


@pytest.fixture
def rigid_body(so3):
    return quadratic_problem(so3, inertia=np.diag([1.0, 2.0, 3.0]))
