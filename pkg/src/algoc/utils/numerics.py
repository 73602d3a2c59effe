"""
Numerics Utility
Fixed-step RK4, finite-difference derivatives and grid differentiation
"""

from typing import Callable, Iterator, Tuple

import numpy as np
from scipy.interpolate import CubicSpline

ArrayFn = Callable[[np.ndarray], np.ndarray]

# fourth-order one-sided stencils for the first two nodes of a uniform grid
_EDGE0 = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0
_EDGE1 = np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / 12.0


def rk4_step(rhs: Callable[[float, np.ndarray], np.ndarray], t: float, y: np.ndarray, h: float) -> np.ndarray:
    """Classical four-stage Runge-Kutta step"""
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = rhs(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def central_jacobian(fn: ArrayFn, x: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Central-difference derivative of an array-valued map.

    The derivative index is appended as the last axis, so a map returning
    shape ``S`` yields an array of shape ``S + (len(x),)``.
    """
    x = np.asarray(x, dtype=float)
    base = np.asarray(fn(x), dtype=float)
    out = np.zeros(base.shape + (x.size,))
    for b in range(x.size):
        dx = np.zeros_like(x)
        dx[b] = step
        out[..., b] = (np.asarray(fn(x + dx)) - np.asarray(fn(x - dx))) / (2.0 * step)
    return out


def segment_slices(segment: np.ndarray) -> Iterator[slice]:
    """Contiguous index ranges sharing the same segment id"""
    segment = np.asarray(segment)
    if segment.size == 0:
        return
    cuts = np.flatnonzero(np.diff(segment)) + 1
    starts = np.concatenate(([0], cuts))
    stops = np.concatenate((cuts, [segment.size]))
    for start, stop in zip(starts, stops):
        yield slice(int(start), int(stop))


def _is_uniform(t: np.ndarray, rtol: float = 1e-9) -> bool:
    steps = np.diff(t)
    return steps.size > 0 and np.allclose(steps, steps[0], rtol=rtol, atol=0.0)


def grid_derivative(t: np.ndarray, values: np.ndarray, order: int = 2) -> np.ndarray:
    """Derivative along axis 0 on one smooth piece of a grid.

    ``order=4`` uses fourth-order central stencils (one-sided near the ends)
    on uniform grids with at least five nodes; otherwise second-order
    ``np.gradient`` with second-order edges.
    """
    t = np.asarray(t, dtype=float)
    values = np.asarray(values, dtype=float)
    if t.size < 2:
        return np.zeros_like(values)
    if t.size < 3:
        slope = (values[1] - values[0]) / (t[1] - t[0])
        return np.stack([slope, slope])
    if order < 4 or t.size < 5 or not _is_uniform(t):
        return np.gradient(values, t, axis=0, edge_order=2)

    h = t[1] - t[0]
    out = np.empty_like(values)
    out[2:-2] = (-values[4:] + 8.0 * values[3:-1] - 8.0 * values[1:-3] + values[:-4]) / (12.0 * h)
    head = values[:5]
    tail = values[-5:][::-1]
    out[0] = np.tensordot(_EDGE0, head, axes=1) / h
    out[1] = np.tensordot(_EDGE1, head, axes=1) / h
    out[-1] = -np.tensordot(_EDGE0, tail, axes=1) / h
    out[-2] = -np.tensordot(_EDGE1, tail, axes=1) / h
    return out


def segmented_derivative(
    t: np.ndarray, values: np.ndarray, segment: np.ndarray, order: int = 2
) -> np.ndarray:
    """Apply :func:`grid_derivative` separately inside each segment"""
    values = np.asarray(values, dtype=float)
    out = np.zeros_like(values)
    for sl in segment_slices(segment):
        out[sl] = grid_derivative(t[sl], values[sl], order=order)
    return out


def derivative_along(grid: np.ndarray, values: np.ndarray, axis: int) -> np.ndarray:
    """Second-order derivative along ``axis`` of a sampled field"""
    moved = np.moveaxis(np.asarray(values, dtype=float), axis, 0)
    return np.moveaxis(grid_derivative(grid, moved, order=2), 0, axis)


class SegmentInterpolant:
    """Cubic splines of sampled data, one spline per control segment.

    Evaluation picks the segment whose closed time interval contains the
    query; at a shared breakpoint the later segment wins unless ``side``
    is ``"left"``.
    """

    def __init__(self, t: np.ndarray, values: np.ndarray, segment: np.ndarray):
        self.pieces = []
        self._by_segment = {}
        t = np.asarray(t, dtype=float)
        values = np.asarray(values, dtype=float)
        segment = np.asarray(segment)
        for sl in segment_slices(segment):
            ts, vs = t[sl], values[sl]
            if ts.size >= 4 and vs[0].size:
                spline = CubicSpline(ts, vs, axis=0)
            else:
                spline = _LinearPiece(ts, vs)
            self.pieces.append((ts[0], ts[-1], spline))
            self._by_segment[int(segment[sl.start])] = spline

    def piece(self, segment_id: int):
        """Interpolant of one segment, evaluated without any side rule"""
        return self._by_segment[int(segment_id)]

    def __call__(self, tq: float, side: str = "right") -> np.ndarray:
        pieces = self.pieces if side == "right" else self.pieces[::-1]
        chosen = None
        for lo, hi, spline in reversed(pieces):
            if lo - 1e-14 <= tq <= hi + 1e-14:
                chosen = spline
                break
        if chosen is None:
            chosen = self.pieces[0][2] if tq < self.pieces[0][0] else self.pieces[-1][2]
        return np.asarray(chosen(tq))


class _LinearPiece:
    """Linear fallback for segments too short for a cubic spline"""

    def __init__(self, t: np.ndarray, values: np.ndarray):
        self.t = t
        self.values = values

    def __call__(self, tq: float) -> np.ndarray:
        if self.t.size == 1 or self.values[0].size == 0:
            return self.values[0]
        flat = self.values.reshape(self.t.size, -1)
        cols = [np.interp(tq, self.t, flat[:, k]) for k in range(flat.shape[1])]
        return np.asarray(cols).reshape(self.values.shape[1:])


def uniform_nodes(t0: float, t1: float, steps: int) -> np.ndarray:
    """``steps + 1`` equispaced nodes including both ends"""
    return np.linspace(t0, t1, steps + 1)


def sup_norm(values: np.ndarray) -> float:
    """Max absolute entry, zero for empty arrays"""
    values = np.asarray(values)
    return float(np.max(np.abs(values))) if values.size else 0.0


def bisect_root(
    fn: Callable[[float], float], lo: float, hi: float, tol: float, max_iter: int = 200
) -> Tuple[float, float]:
    """Bracketing bisection for a sign change of ``fn`` on ``[lo, hi]``.

    Returns the bracket ``(lo, hi)`` after shrinking it below ``tol``;
    ``fn(lo)`` keeps the sign of the left end.
    """
    f_lo = fn(lo)
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        f_mid = fn(mid)
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return lo, hi
