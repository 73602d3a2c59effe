"""
Tests for needle symbols, needle controls and the variation cone
"""

import numpy as np
import pytest

from algoc.services.dynamics import PiecewiseControl, integrate_base
from algoc.services.needle import (
    NeedleEntry,
    NeedleSymbol,
    augment_cone,
    build_cone,
    cone_to_frame,
    default_probe_times,
    finite_difference_variation,
    infinitesimal_variation,
    needle_control,
)
from algoc.services.transport import TransportFlow
from algoc.utils.errors import NeedleError


@pytest.fixture
def long_bang():
    return PiecewiseControl(np.array([0.0, 1.5, 3.0]), np.array([[1.0], [-1.0]]))


def test_symbol_validation():
    v = np.array([1.0])
    with pytest.raises(NeedleError):
        NeedleSymbol((NeedleEntry(0.5, v, 1.0), NeedleEntry(0.3, v, 1.0)), tau=1.0)
    with pytest.raises(NeedleError):
        NeedleSymbol((NeedleEntry(0.5, v, -1.0),), tau=1.0)
    with pytest.raises(NeedleError):
        NeedleSymbol.single(1.5, v, tau=1.0)


def test_entries_at_one_time_are_stacked():
    v = np.array([1.0])
    sym = NeedleSymbol((NeedleEntry(0.5, v, 1.0), NeedleEntry(0.5, v, 2.0)), tau=1.0)
    assert sym.offsets() == [-3.0, -2.0]
    (lo1, hi1), (lo2, hi2) = sym.intervals(0.1)
    assert hi1 == pytest.approx(lo2)
    assert hi2 == pytest.approx(0.5)
    assert lo1 == pytest.approx(0.2)

    at_anchor = NeedleSymbol.single(1.0, v, 1.0, tau=1.0, dt=2.0)
    assert at_anchor.offsets() == [1.0]


def test_needle_control_inserts_the_value(bang_control):
    sym = NeedleSymbol.single(0.7, [-1.0], 1.0)
    varied = needle_control(bang_control, sym, 0.1)
    assert np.allclose(varied.breakpoints, [0.0, 0.6, 0.7, 1.2, 3.0])
    assert varied.value_at(0.55)[0] == 1.0
    assert varied.value_at(0.65)[0] == -1.0
    assert varied.value_at(0.75)[0] == 1.0
    assert varied.value_at(2.0)[0] == -1.0


def test_time_shift_stretches_the_horizon(bang_control):
    varied = needle_control(bang_control, NeedleSymbol.time_shift(2.0, 1.0), 0.5)
    assert varied.t1 == pytest.approx(3.5)
    assert np.allclose(varied.breakpoints, [0.0, 1.2, 2.5, 3.5])
    assert varied.value_at(2.2)[0] == -1.0


def test_needle_control_rejects_bad_parameters(bang_control):
    sym = NeedleSymbol.single(0.7, [-1.0], 1.0)
    with pytest.raises(NeedleError):
        needle_control(bang_control, sym, -0.1)
    with pytest.raises(NeedleError):
        needle_control(bang_control, sym, 1.0)
    with pytest.raises(NeedleError):
        needle_control(bang_control, NeedleSymbol.time_shift(3.0, 1.0), 0.1)


def test_switch_times_are_not_needle_times(pendulum, bang_control):
    path = integrate_base(pendulum, bang_control, [0.5, 0.0], steps_per_segment=20)
    with pytest.raises(NeedleError):
        infinitesimal_variation(pendulum, bang_control, path, NeedleSymbol.single(1.2, [-1.0], tau=2.0))
    with pytest.raises(NeedleError):
        infinitesimal_variation(pendulum, bang_control, path, NeedleSymbol.time_shift(1.2, 1.0))


@pytest.mark.parametrize(
    "sym",
    [NeedleSymbol.single(0.7, [-1.0], 1.0), NeedleSymbol.time_shift(2.0, 1.0)],
    ids=["needle", "time_shift"],
)
def test_finite_differences_converge_to_the_variation(pendulum, long_bang, sym):
    base = integrate_base(pendulum, long_bang, [0.5, 0.0], steps_per_segment=400)
    d = infinitesimal_variation(pendulum, long_bang, base, sym, TransportFlow(pendulum, long_bang, base))
    errors = []
    for s in (1e-2, 1e-3, 1e-4):
        fd = finite_difference_variation(pendulum, long_bang, [0.5, 0.0], sym, s, 400, base=base)
        errors.append(np.linalg.norm(fd - d) / np.linalg.norm(d))
    assert errors[0] > errors[1] > errors[2]
    assert errors[2] <= 1e-3


def test_cone_generators_and_lines(pendulum, bang_control):
    path = integrate_base(pendulum, bang_control, [0.5, 0.0], steps_per_segment=100)
    cone = build_cone(pendulum, bang_control, path, 2.5, probe_controls=[[-1.0], [0.0], [1.0]], probe_times=[0.3, 2.0])
    assert len(cone) == 6
    assert cone.dim == 3
    assert cone.lines == [(0, 1)]
    assert np.array_equal(cone.generators[1], -cone.generators[0])
    assert [p["kind"] for p in cone.provenance] == ["time", "time"] + ["needle"] * 4
    assert {tuple(p["v"]) for p in cone.provenance[2:4]} == {(-1.0,), (0.0,)}

    with pytest.raises(NeedleError):
        build_cone(pendulum, bang_control, path, 2.5, probe_times=[2.9])

    augmented = augment_cone(cone, [[1.0, 0.0, 0.0]])
    assert len(augmented) == 8
    assert augmented.lines == [(0, 1), (6, 7)]
    assert augment_cone(cone, None) is cone

    frame = cone_to_frame(augmented)
    assert list(frame.columns) == ["g_1", "g_2", "g_3", "kind", "tau", "v"]
    assert list(frame["kind"].iloc[-2:]) == ["subspace", "subspace"]


def test_default_probe_times_flank_the_switches(pendulum, bang_control):
    path = integrate_base(pendulum, bang_control, [0.5, 0.0], steps_per_segment=10)
    times = default_probe_times(path, bang_control, 2.5)
    assert np.all(times <= 2.5)
    assert np.all(times > 0.0)
    for flank in (1.2 - 3e-7, 1.2 + 3e-7):
        assert np.any(np.isclose(times, flank, rtol=0.0, atol=1e-12))
