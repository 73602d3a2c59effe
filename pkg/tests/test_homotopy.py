"""
Tests for algebroid homotopies generated from families of admissible paths
"""

import numpy as np
import pytest

from algoc.services.dynamics import PiecewiseControl, SampledPath, integrate_base
from algoc.services.homotopy import (
    anchor_compatibility_residual,
    family_from_initial_points,
    final_point_homotopy,
    generate_homotopy,
    homotopy_residual,
    reparametrization_homotopy,
    sheet_to_frame,
    stack_sheets,
)
from algoc.utils.errors import AdmissibilityError, DimensionError, JoinMismatchError, ReparametrizationError


def _pendulum_sheet(problem, u, steps, ds=1e-3, workers=1, check=True):
    s_grid = np.array([-ds, 0.0, ds])
    paths = family_from_initial_points(problem, u, lambda s: [0.5 + s, 0.0], s_grid, steps)
    return generate_homotopy(problem.alg, paths, lambda s: [1.0, 0.0], s_grid, workers=workers, check=check)


def _line_family(s_grid, nodes, slope=1.0):
    """x(t, s) = t (1, s) on [0, 1]"""
    t = np.linspace(0.0, 1.0, nodes)
    paths = []
    for s in s_grid:
        x = np.outer(t, [1.0, s])
        a = np.tile([slope, s], (nodes, 1))
        paths.append(SampledPath(t=t, x=x, a=a, segment=np.zeros(nodes, dtype=int)))
    return paths


def test_initial_point_family_tracks_the_state_derivative(pendulum, bang_control):
    sheet = _pendulum_sheet(pendulum, bang_control, steps=200)
    assert sheet.b.shape == (sheet.t.size, 3, 2)
    assert np.allclose(sheet.b[0], [[1.0, 0.0]] * 3)
    assert anchor_compatibility_residual(pendulum.alg, sheet) <= 1e-4
    assert homotopy_residual(pendulum.alg, sheet) <= 1e-3


def test_anchor_residual_shrinks_with_refinement(pendulum, bang_control):
    residuals = [
        anchor_compatibility_residual(pendulum.alg, _pendulum_sheet(pendulum, bang_control, steps, ds=1e-2, check=False))
        for steps in (10, 40)
    ]
    assert residuals[1] < residuals[0]


def test_worker_pool_keeps_slice_order(pendulum, bang_control):
    serial = _pendulum_sheet(pendulum, bang_control, steps=50)
    pooled = _pendulum_sheet(pendulum, bang_control, steps=50, workers=2)
    assert np.array_equal(serial.b, pooled.b)


def test_tangent_family_is_anchor_compatible(tangent2):
    s_grid = np.linspace(-0.1, 0.1, 5)
    sheet = generate_homotopy(tangent2, _line_family(s_grid, 21), None, s_grid)
    assert anchor_compatibility_residual(tangent2, sheet) <= 1e-10


@pytest.mark.parametrize("nodes", [11, 21, 41])
def test_skew_bracket_breaks_anchor_compatibility(plane, nodes):
    # bdot_1 = s b_1 - t along x = t (1, s); chi = (-b_1, 0) stays near t^2 / 2
    s_grid = np.linspace(-0.1, 0.1, 5)
    sheet = generate_homotopy(plane, _line_family(s_grid, nodes), None, s_grid)
    assert anchor_compatibility_residual(plane, sheet) > 0.1


def test_family_checks(tangent2):
    s_grid = np.linspace(-0.1, 0.1, 3)
    with pytest.raises(AdmissibilityError):
        generate_homotopy(tangent2, _line_family(s_grid, 11, slope=2.0), None, s_grid)
    with pytest.raises(DimensionError):
        generate_homotopy(tangent2, _line_family([0.0], 11), None, [0.0])
    with pytest.raises(DimensionError):
        generate_homotopy(tangent2, _line_family(s_grid, 11), np.zeros((2, 2)), s_grid)
    mixed = _line_family(s_grid[:2], 11) + _line_family(s_grid[2:], 21)
    with pytest.raises(DimensionError):
        generate_homotopy(tangent2, mixed, None, s_grid)


def test_initial_point_homotopy_must_be_admissible(pendulum, bang_control):
    s_grid = np.array([-1e-3, 0.0, 1e-3])
    paths = family_from_initial_points(pendulum, bang_control, lambda s: [0.5 + s, 0.0], s_grid, 20)
    with pytest.raises(AdmissibilityError) as excinfo:
        generate_homotopy(pendulum.alg, paths, lambda s: [0.0, 1.0], s_grid)
    assert excinfo.value.residual == pytest.approx(1.0)

    sheet = generate_homotopy(pendulum.alg, paths, lambda s: [0.0, 1.0], s_grid, check=False)
    assert np.allclose(sheet.b[0], [[0.0, 1.0]] * 3)


def test_reparametrization_sheet_is_anchor_compatible(pendulum):
    u = PiecewiseControl.constant([0.5], 0.0, 1.0)
    path = integrate_base(pendulum, u, [0.3, 0.1], steps_per_segment=200)
    s_grid = np.linspace(0.5, 1.0, 51)
    sheet = reparametrization_homotopy(path, lambda s: s, s_grid, dh=lambda s: 1.0)
    assert anchor_compatibility_residual(pendulum.alg, sheet) <= 1e-3
    assert np.allclose(sheet.b[0], 0.0)

    final = final_point_homotopy(sheet)
    assert np.allclose(final.b[-1], path.a[-1], atol=1e-9)
    assert final.sup_norm > 0.0


def test_reparametrization_rejects_switching_paths(pendulum, bang_control):
    path = integrate_base(pendulum, bang_control, [0.5, 0.0], steps_per_segment=10)
    with pytest.raises(ReparametrizationError):
        reparametrization_homotopy(path, lambda s: s, [0.5, 1.0])


def test_stacking_needs_matching_junction(pendulum, bang_control, tangent2):
    first = _pendulum_sheet(pendulum, bang_control, steps=20, check=False)
    with pytest.raises(JoinMismatchError):
        stack_sheets(first, first)

    s_grid = np.linspace(-0.1, 0.1, 5)
    other = generate_homotopy(tangent2, _line_family(s_grid, 11), None, s_grid)
    with pytest.raises(DimensionError):
        stack_sheets(first, other)


def test_sheet_frame_is_long_format(tangent2):
    s_grid = np.linspace(-0.1, 0.1, 3)
    sheet = generate_homotopy(tangent2, _line_family(s_grid, 6), None, s_grid)
    frame = sheet_to_frame(sheet)
    assert len(frame) == 18
    assert list(frame.columns) == ["t", "s", "x_1", "x_2", "a_1", "a_2", "b_1", "b_2"]
    assert final_point_homotopy(sheet).statement
