"""
Tests for piecewise controls, path integration, composition and reparametrization
"""

import numpy as np
import pytest

from algoc.components.problems import lqr_problem
from algoc.services.dynamics import (
    PiecewiseControl,
    admissibility_residual,
    compose,
    control_grid,
    integrate_base,
    lipschitz_estimate,
    null_path,
    path_to_frame,
    reparametrize,
)
from algoc.utils.errors import (
    ControlDomainError,
    DimensionError,
    DivergenceError,
    JoinMismatchError,
    ReparametrizationError,
)


def test_control_segment_convention(bang_control):
    assert bang_control.value_at(0.0)[0] == 1.0
    assert bang_control.value_at(1.2)[0] == 1.0
    assert bang_control.value_at(1.2 + 1e-12)[0] == -1.0
    assert bang_control.value_at(3.0)[0] == -1.0
    assert bang_control.switch_times == [1.2]
    assert bang_control.n_segments == 2


def test_control_validation():
    with pytest.raises(ControlDomainError):
        PiecewiseControl(np.array([0.0, 1.0, 1.0]), np.array([[1.0], [2.0]]))
    with pytest.raises(ControlDomainError):
        PiecewiseControl(np.array([0.0, 1.0]), np.array([[1.0], [2.0]]))
    with pytest.raises(ControlDomainError):
        PiecewiseControl(np.array([0.0]), np.zeros((0, 1)))


def test_control_restrict_shift_merge(bang_control):
    part = bang_control.restrict(1.0, 2.0)
    assert list(part.breakpoints) == [1.0, 1.2, 2.0]
    assert list(part.values[:, 0]) == [1.0, -1.0]

    shifted = bang_control.shift(0.5, after=1.0)
    assert list(shifted.breakpoints) == [0.0, 1.7, 3.5]

    split = PiecewiseControl(np.array([0.0, 1.0, 2.0, 3.0]), np.array([[1.0], [1.0], [-1.0]]))
    merged = split.merged()
    assert list(merged.breakpoints) == [0.0, 2.0, 3.0]
    assert split.switch_times == [2.0]

    with pytest.raises(ControlDomainError):
        bang_control.restrict(-1.0, 2.0)


def test_control_grid_repeats_breakpoints(bang_control):
    t, segment = control_grid(bang_control, 4)
    assert t.size == 10
    assert np.sum(t == 1.2) == 2
    assert list(np.unique(segment)) == [0, 1]


def test_linear_flow_matches_closed_form(lqr):
    u = PiecewiseControl.constant([1.0], 0.0, 2.0)
    path = integrate_base(lqr, u, [1.0], steps_per_segment=200)
    a = 0.5
    exact = (1.0 + 1.0 / a) * np.exp(a * path.t) - 1.0 / a
    assert np.max(np.abs(path.x[:, 0] - exact)) < 1e-9
    assert np.all(np.diff(path.cost) > 0)
    assert np.allclose(path.a[:, 0], a * path.x[:, 0] + 1.0)


def test_integrated_path_is_admissible(pendulum, bang_control):
    path = integrate_base(pendulum, bang_control, [0.5, 0.0], steps_per_segment=200)
    assert path.t[0] == 0.0 and path.t[-1] == 3.0
    assert admissibility_residual(pendulum.alg, path, order=4) < 1e-6
    # one-sided values at the switch
    k = np.flatnonzero(path.t == 1.2)
    assert path.u[k[0], 0] == 1.0 and path.u[k[1], 0] == -1.0
    assert np.allclose(path.x[k[0]], path.x[k[1]])


def test_integration_rejects_wrong_dimensions(pendulum):
    u = PiecewiseControl.constant([1.0, 0.0], 0.0, 1.0)
    with pytest.raises(DimensionError):
        integrate_base(pendulum, u, [0.0, 0.0])
    with pytest.raises(DimensionError):
        integrate_base(pendulum, PiecewiseControl.constant([1.0], 0.0, 1.0), [0.0])


def test_overflow_guard_stops_integration(tangent1):
    fast = lqr_problem(tangent1, a=50.0)
    with pytest.raises(DivergenceError) as info:
        integrate_base(fast, PiecewiseControl.constant([0.0], 0.0, 1.0), [1.0])
    assert 0.0 < info.value.last_time < 1.0


def test_compose_shifts_and_checks_the_junction(pendulum, bang_control):
    first = integrate_base(pendulum, bang_control, [0.5, 0.0], steps_per_segment=20)
    second = integrate_base(pendulum, bang_control, first.x_final, steps_per_segment=20)
    joined = compose(first, second)
    assert joined.t[-1] == pytest.approx(6.0)
    assert joined.segment.max() == 3
    assert joined.cost[-1] == pytest.approx(first.cost[-1] + second.cost[-1])
    with pytest.raises(JoinMismatchError):
        compose(first, first)


def test_reparametrization_keeps_admissibility(pendulum):
    u = PiecewiseControl.constant([0.5], 0.0, 1.0)
    path = integrate_base(pendulum, u, [0.3, 0.1], steps_per_segment=200)
    h = lambda s: 0.5 * (s + s * s)
    dh = lambda s: 0.5 * (1.0 + 2.0 * s)
    new = reparametrize(path, h, dh)
    assert new.t[0] == pytest.approx(0.0) and new.t[-1] == pytest.approx(1.0)
    assert np.allclose(new.x[-1], path.x_final, atol=1e-9)
    assert admissibility_residual(pendulum.alg, new, order=4) < 1e-6


def test_reversed_time_change(pendulum):
    u = PiecewiseControl.constant([0.0], 0.0, 1.0)
    path = integrate_base(pendulum, u, [0.3, 0.1], steps_per_segment=100)
    new = reparametrize(path, lambda s: 1.0 - s, lambda s: -1.0)
    assert np.allclose(new.x[0], path.x_final, atol=1e-9)
    assert np.allclose(new.x[-1], path.x[0], atol=1e-9)
    assert admissibility_residual(pendulum.alg, new, order=4) < 1e-6


@pytest.mark.parametrize(
    "h",
    [
        lambda s: s * s,  # vanishing derivative at 0
        lambda s: np.sin(np.pi * s),  # not monotone
        lambda s: 2.0 * s,  # wrong image
    ],
)
def test_invalid_time_changes(pendulum, h):
    path = integrate_base(pendulum, PiecewiseControl.constant([0.0], 0.0, 1.0), [0.0, 0.0], 20)
    with pytest.raises(ReparametrizationError):
        reparametrize(path, h)


def test_null_path(tangent2):
    path = null_path(tangent2, [1.0, 2.0], 0.0, 1.0, nodes=5)
    assert np.all(path.a == 0.0)
    assert np.allclose(path.x, [[1.0, 2.0]] * 5)
    assert admissibility_residual(tangent2, path) == 0.0


def test_path_frame_columns(pendulum, bang_control):
    path = integrate_base(pendulum, bang_control, [0.5, 0.0], steps_per_segment=10)
    frame = path_to_frame(path)
    assert list(frame.columns) == ["t", "x_1", "x_2", "a_1", "a_2", "cost"]
    assert len(frame) == path.t.size


def test_lipschitz_estimate_of_linear_flow(lqr):
    u = PiecewiseControl.constant([0.0], 0.0, 1.0)
    assert lipschitz_estimate(lqr, u, [1.0]) == pytest.approx(np.exp(0.5), rel=1e-6)
