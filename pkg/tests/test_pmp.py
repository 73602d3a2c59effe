"""
Tests for extremal synthesis, maximum-principle residuals and conserved quantities
"""

import numpy as np
import pytest

from algoc.components.oracles import (
    chaplygin_eom_residual,
    chaplygin_momenta,
    euler_poincare_reference,
    lqr_closed_form,
)
from algoc.components.problems import quadratic_problem, two_axis_problem
from algoc.services.algebroid import chaplygin_metric
from algoc.services.dynamics import PiecewiseControl, SampledPath, integrate_base
from algoc.services.pmp import (
    alpha_bookkeeping,
    casimir_drift,
    euler_lagrange_residual,
    free_horizon_scale,
    hamiltonian_drift,
    pmp_residual_report,
    solve_extremal,
    transversality_check,
)
from algoc.services.problem import ControlSet, time_augment
from algoc.services.transport import costate_transport
from algoc.utils.errors import ConfigError, SingularArcError


@pytest.fixture(scope="module")
def so3_extremal():
    from algoc.services.algebroid import so3_algebra

    problem = two_axis_problem(so3_algebra(), a=[0.0, 0.0, 1.0], b=[1.0, 0.0, 0.0])
    control, traj = solve_extremal(problem, [], [0.3, 1.0, 0.2], t1=6.0, mode="free", steps=1200)
    return problem, control, traj


def test_free_horizon_scale(two_axis):
    assert free_horizon_scale(two_axis, [], [0.3, 1.0, 0.2]) == pytest.approx(2.0, rel=1e-12)


def test_so3_control_follows_switching_sign(so3_extremal):
    _, control, traj = so3_extremal
    switching = traj.xi @ np.array([1.0, 0.0, 0.0])
    regular = traj.grid_node & (np.abs(switching) > 1e-9)
    assert regular.sum() > 1000
    assert np.array_equal(traj.u[regular, 0], np.sign(switching[regular]))
    assert len(traj.switch_times) >= 2
    assert list(traj.switch_times) == control.switch_times


def test_so3_extremal_satisfies_the_maximum_principle(so3_extremal):
    problem, control, traj = so3_extremal
    assert np.max(np.abs(traj.H)) <= 1e-6
    report = pmp_residual_report(problem, control, traj, tol=1e-6, h_zero=True)
    assert report.passed, report.issues
    assert report.adjoint_residual <= 1e-6
    assert report.excluded_nodes > 0
    assert casimir_drift(traj) <= 1e-8


def test_switch_nodes_are_duplicated(so3_extremal):
    _, _, traj = so3_extremal
    for s in traj.switch_times:
        k = np.flatnonzero(traj.t == s)
        assert k.size == 2
        assert traj.u[k[0], 0] == -traj.u[k[1], 0]


def test_non_extremal_control_is_flagged(two_axis):
    u = PiecewiseControl.constant([1.0], 0.0, 1.0)
    path = integrate_base(two_axis, u, [], steps_per_segment=100)
    traj = costate_transport(two_axis, u, path, [-1.0, 0.0, 0.0])
    report = pmp_residual_report(two_axis, u, traj)
    assert not report.passed
    assert report.max_condition_violation > 1.0
    assert report.issues


def test_chaplygin_extremal_reproduces_equations_of_motion(chaplygin):
    M = chaplygin_metric()[np.ix_([2, 0], [2, 0])]
    assert np.allclose(M, [[3.0, -1.0], [-1.0, 1.0]])
    problem = quadratic_problem(chaplygin, inertia=M)
    _, traj = solve_extremal(problem, [], [0.8, 0.3], t1=2.0, steps=1200)
    eom = chaplygin_eom_residual(traj.t, traj.u)
    assert eom["first"] <= 1e-6
    assert eom["second"] <= 1e-6
    assert np.max(np.abs(traj.xi - chaplygin_momenta(traj.u))) <= 1e-12


def test_rigid_body_matches_euler_poincare(rigid_body):
    _, traj = solve_extremal(rigid_body, [], [1.0, 0.5, -0.3], t1=5.0, steps=1200)
    reference = euler_poincare_reference(np.diag([1.0, 2.0, 3.0]), traj.xi[0], traj.t)
    assert np.max(np.abs(traj.xi - reference)) <= 1e-6
    assert hamiltonian_drift(traj) <= 1e-6
    assert casimir_drift(traj) <= 1e-6


def test_rigid_body_path_solves_euler_lagrange(rigid_body):
    _, traj = solve_extremal(rigid_body, [], [1.0, 0.5, -0.3], t1=5.0, steps=1200)
    inertia = np.array([1.0, 2.0, 3.0])
    grad = lambda x, y: (np.zeros(0), inertia * y)
    assert euler_lagrange_residual(rigid_body.alg, None, traj.path(), grad) <= 1e-6


def test_constant_velocity_is_not_euler_lagrange(so3):
    t = np.linspace(0.0, 1.0, 11)
    y = np.tile([1.0, 0.5, 0.0], (t.size, 1))
    path = SampledPath(t=t, x=np.zeros((t.size, 0)), a=y, segment=np.zeros(t.size, dtype=int))
    L = lambda x, v: 0.5 * (v[0] ** 2 + 2.0 * v[1] ** 2 + 3.0 * v[2] ** 2)
    assert euler_lagrange_residual(so3, L, path) == pytest.approx(0.5, rel=1e-5)


def test_lqr_extremal_matches_riccati(lqr):
    ref = lqr_closed_form(0.5, 1.0, 1.0, 1.0, 1.0, np.array([0.0]))
    _, traj = solve_extremal(lqr, [1.0], [ref["xi"][0]], t1=1.0, steps=400)
    exact = lqr_closed_form(0.5, 1.0, 1.0, 1.0, 1.0, traj.t)
    assert np.max(np.abs(traj.x[:, 0] - exact["x"])) <= 1e-8
    assert np.max(np.abs(traj.xi[:, 0] - exact["xi"])) <= 1e-8
    assert np.allclose(traj.u[:, 0], traj.xi[:, 0])

    end = transversality_check(lqr, traj, S1=[[1.0]])
    assert end.passed
    start = transversality_check(lqr, traj, S0=[[1.0]], S1=[[1.0]], extended=True)
    assert not start.passed
    assert start.start_violation == pytest.approx(abs(ref["xi"][0]), rel=1e-9)


def test_extremal_argument_checks(two_axis, rigid_body):
    with pytest.raises(ConfigError):
        solve_extremal(two_axis, [], [1.0, 0.0, 0.0], xi0=0.5)
    with pytest.raises(ConfigError):
        solve_extremal(two_axis, [], [1.0, 0.0, 0.0], mode="open")
    with pytest.raises(ConfigError):
        solve_extremal(two_axis, [], [1.0, 0.0, 0.0], t0=1.0, t1=1.0)
    with pytest.raises(ConfigError):
        solve_extremal(two_axis, [], [0.0, 0.0, 0.0], xi0=0.0)
    with pytest.raises(ConfigError):
        solve_extremal(rigid_body, [], [1.0, 0.0, 0.0], mode="free")


def test_vanishing_switching_function_is_singular(so3):
    problem = two_axis_problem(so3, a=[0.0, 0.0, 1.0], b=[0.0, 0.0, 1.0])
    with pytest.raises(SingularArcError):
        solve_extremal(problem, [], [1.0, 0.0, 0.0], t1=1.0, steps=20)


def test_clock_bookkeeping_is_constant(tangent1):
    problem = time_augment(
        tangent1,
        lambda x, z, u: np.array([u[0]]),
        ControlSet.from_hook(lambda x, xi, xi0: np.array([xi[0] / -xi0]), 1),
        L=lambda x, z, u: 0.5 * (u[0] ** 2 + (1.0 + z) * x[0] ** 2),
    )
    _, traj = solve_extremal(problem, [1.0, 0.0], [-0.5, 0.0], t1=1.0, steps=400)
    book = alpha_bookkeeping(problem, traj)
    assert np.ptp(book["H"]) > 1e-3
    assert book["drift"] <= 1e-5

    with pytest.raises(ConfigError):
        alpha_bookkeeping(quadratic_problem(tangent1), traj)
