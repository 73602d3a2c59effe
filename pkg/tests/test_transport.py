"""
Tests for parallel transport of fiber vectors and costates
"""

import numpy as np
import pytest

from algoc.services.dynamics import PiecewiseControl, integrate_base
from algoc.services.transport import (
    TransportFlow,
    costate_trajectory_frame,
    costate_transport,
    pairing_drift,
    parallel_transport,
)
from algoc.utils.errors import DimensionError


def test_linear_transport_is_exponential(lqr):
    u = PiecewiseControl.constant([0.3], 0.0, 2.0)
    path = integrate_base(lqr, u, [1.0])
    fiber = parallel_transport(lqr, u, path, [1.0])
    assert fiber.b_final[0] == pytest.approx(np.exp(1.0), rel=1e-10)
    assert np.allclose(fiber.x, path.x)


def test_extended_transport_picks_up_cost(lqr):
    u = PiecewiseControl.constant([0.0], 0.0, 1.0)
    path = integrate_base(lqr, u, [1.0])
    fiber = parallel_transport(lqr, u, path, [1.0, 0.0])
    # b = e^{at}, x = e^{at}: the cost slot integrates q x b = e^{2at}
    expected = np.exp(1.0) - 1.0
    assert fiber.b_final[1] == pytest.approx(expected, rel=1e-9)


def test_transport_rejects_bad_vector(pendulum, bang_control):
    path = integrate_base(pendulum, bang_control, [0.5, 0.0], 10)
    with pytest.raises(DimensionError):
        parallel_transport(pendulum, bang_control, path, [1.0, 2.0, 3.0, 4.0])


def test_pairing_is_preserved_along_bang_control(pendulum, bang_control):
    path = integrate_base(pendulum, bang_control, [0.5, 0.0], steps_per_segment=200)
    drift = pairing_drift(pendulum, bang_control, path, [1.0, 0.5, 0.0], [0.2, -0.4], -1.0)
    assert drift <= 1e-8


def test_pairing_drift_is_fourth_order(pendulum, bang_control):
    drifts = []
    for steps in (20, 40):
        path = integrate_base(pendulum, bang_control, [0.5, 0.0], steps_per_segment=steps)
        drifts.append(pairing_drift(pendulum, bang_control, path, [1.0, 0.5, 0.0], [0.2, -0.4], -1.0))
    assert drifts[1] > 0.0
    assert 12.0 <= drifts[0] / drifts[1] <= 20.0


def test_pairing_on_so3_bang_control(two_axis):
    u = PiecewiseControl(np.array([0.0, 1.0, 2.5, 4.0]), np.array([[1.0], [-1.0], [1.0]]))
    path = integrate_base(two_axis, u, [], steps_per_segment=200)
    drift = pairing_drift(two_axis, u, path, [1.0, -1.0, 0.5, 0.0], [0.3, 1.0, 0.2], -1.0)
    assert drift <= 1e-8


def test_costate_prescribed_at_the_end(pendulum, bang_control):
    path = integrate_base(pendulum, bang_control, [0.5, 0.0], steps_per_segment=200)
    xi_end = np.array([0.3, -0.2])
    traj = costate_transport(pendulum, bang_control, path, xi_end, xi0=-1.0, at="end")
    assert np.allclose(traj.xi[-1], xi_end, atol=1e-8)
    assert traj.switch_times == (1.2,)
    assert traj.gap.shape == traj.t.shape

    forward = costate_transport(pendulum, bang_control, path, traj.xi[0], xi0=-1.0)
    assert np.allclose(forward.xi, traj.xi, atol=1e-12)


def test_costate_transport_rejects_unknown_anchor(pendulum, bang_control):
    path = integrate_base(pendulum, bang_control, [0.5, 0.0], 10)
    with pytest.raises(ValueError):
        costate_transport(pendulum, bang_control, path, [0.0, 1.0], at="middle")


def test_flow_between_nodes(lqr):
    u = PiecewiseControl.constant([0.0], 0.0, 1.0)
    path = integrate_base(lqr, u, [1.0], steps_per_segment=50)
    flow = TransportFlow(lqr, u, path)
    moved = flow.transport(0.3337, [1.0, 0.0])
    assert moved[0] == pytest.approx(np.exp(0.5 * (1.0 - 0.3337)), rel=1e-9)
    x, M = flow.state_at(0.3337)
    assert x[0] == pytest.approx(np.exp(0.5 * 0.3337), rel=1e-9)
    assert M.shape == (2, 2)
    with pytest.raises(ValueError):
        flow.state_at(1.5)


def test_pullback_is_transpose_of_transport(pendulum, bang_control):
    path = integrate_base(pendulum, bang_control, [0.5, 0.0], steps_per_segment=50)
    flow = TransportFlow(pendulum, bang_control, path)
    v, phi = np.array([0.4, -1.0, 0.2]), np.array([1.0, 2.0, -1.0])
    moved = flow.transport_basis([v])[0]
    assert moved @ phi == pytest.approx(v @ flow.pullback(phi), rel=1e-12, abs=1e-12)


def test_costate_frame_columns(lqr):
    u = PiecewiseControl.constant([0.0], 0.0, 1.0)
    path = integrate_base(lqr, u, [1.0], steps_per_segment=10)
    frame = costate_trajectory_frame(costate_transport(lqr, u, path, [0.5]))
    assert list(frame.columns) == ["t", "x_1", "xi_1", "xi0", "H", "gap"]
