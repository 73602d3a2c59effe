"""
Dynamics Service
Piecewise-constant controls, sampled admissible paths and their integration
"""

from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from loguru import logger

from ..config.settings import DEFAULTS
from ..utils.errors import (
    AdmissibilityError,
    ControlDomainError,
    DimensionError,
    DivergenceError,
    JoinMismatchError,
    ReparametrizationError,
)
from ..utils.numerics import (
    SegmentInterpolant,
    bisect_root,
    rk4_step,
    segment_slices,
    segmented_derivative,
    sup_norm,
    uniform_nodes,
)
from .algebroid import LocalAlgebroid
from .problem import ControlProblem


@dataclass(frozen=True)
class PiecewiseControl:
    """Value ``values[k]`` on (s_k, s_{k+1}]; the first segment also owns s_0"""

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float).reshape(-1)
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim == 1:
            vals = vals.reshape(-1, 1)
        if bp.size < 2:
            raise ControlDomainError("a control needs at least two breakpoints")
        if np.any(np.diff(bp) <= 0):
            raise ControlDomainError("control breakpoints must be strictly increasing")
        if vals.shape[0] != bp.size - 1:
            raise ControlDomainError(f"{bp.size - 1} segments but {vals.shape[0]} control values")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, value, t0: float, t1: float) -> "PiecewiseControl":
        return cls(np.array([t0, t1]), np.atleast_2d(np.asarray(value, dtype=float)))

    @property
    def t0(self) -> float:
        return float(self.breakpoints[0])

    @property
    def t1(self) -> float:
        return float(self.breakpoints[-1])

    @property
    def n_segments(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def segment_of(self, t: float) -> int:
        k = int(np.searchsorted(self.breakpoints, t, side="left")) - 1
        return min(max(k, 0), self.n_segments - 1)

    def value_at(self, t: float) -> np.ndarray:
        return self.values[self.segment_of(t)]

    @property
    def switch_times(self) -> List[float]:
        """Interior breakpoints where the value actually changes"""
        jumps = np.any(self.values[1:] != self.values[:-1], axis=1)
        return [float(t) for t in self.breakpoints[1:-1][jumps]]

    def restrict(self, t0: float, t1: float) -> "PiecewiseControl":
        if not (self.t0 - 1e-12 <= t0 < t1 <= self.t1 + 1e-12):
            raise ControlDomainError(f"[{t0}, {t1}] is not inside [{self.t0}, {self.t1}]")
        inner = self.breakpoints[(self.breakpoints > t0) & (self.breakpoints < t1)]
        bp = np.concatenate(([t0], inner, [t1]))
        vals = np.array([self.value_at(0.5 * (a + b)) for a, b in zip(bp[:-1], bp[1:])])
        return PiecewiseControl(bp, vals)

    def shift(self, dt: float, after: Optional[float] = None) -> "PiecewiseControl":
        """Shift every breakpoint later than ``after`` (all when None) by ``dt``"""
        bp = self.breakpoints.copy()
        mask = np.ones_like(bp, dtype=bool) if after is None else bp > after
        bp[mask] += dt
        return PiecewiseControl(bp, self.values)

    def merged(self) -> "PiecewiseControl":
        """Drop breakpoints between equal values"""
        keep = [0]
        for k in range(1, self.n_segments):
            if np.any(self.values[k] != self.values[keep[-1]]):
                keep.append(k)
        bp = np.append(self.breakpoints[keep], self.t1)
        return PiecewiseControl(bp, self.values[keep])


@dataclass(frozen=True)
class SampledPath:
    """Samples of an admissible path; nodes at control breakpoints are duplicated.

    ``segment[k]`` is the control segment owning node k, so both one-sided
    values of ``a`` survive at a switch.
    """

    t: np.ndarray
    x: np.ndarray
    a: Optional[np.ndarray]
    segment: np.ndarray
    cost: Optional[np.ndarray] = None
    u: Optional[np.ndarray] = None

    @property
    def t0(self) -> float:
        return float(self.t[0])

    @property
    def t1(self) -> float:
        return float(self.t[-1])

    @property
    def n(self) -> int:
        return self.x.shape[1]

    @property
    def m(self) -> int:
        return 0 if self.a is None else self.a.shape[1]

    @property
    def x_final(self) -> np.ndarray:
        return self.x[-1]

    def node_before(self, t: float) -> int:
        """Last node with time <= t that owns t under the left-open convention"""
        idx = int(np.searchsorted(self.t, t, side="left")) - 1
        return min(max(idx, 0), self.t.size - 2)


def control_grid(u: PiecewiseControl, steps_per_segment: int) -> Tuple[np.ndarray, np.ndarray]:
    """Uniform grid inside every control segment; breakpoint nodes repeated"""
    ts, segs = [], []
    for k in range(u.n_segments):
        nodes = uniform_nodes(u.breakpoints[k], u.breakpoints[k + 1], steps_per_segment)
        ts.append(nodes)
        segs.append(np.full(nodes.size, k))
    return np.concatenate(ts), np.concatenate(segs)


def step_controls(u: PiecewiseControl, t: np.ndarray) -> np.ndarray:
    """Control value for the step ending at each node (row 0 unused)"""
    out = np.empty((t.size, u.dim))
    out[0] = u.value_at(t[0])
    mids = 0.5 * (t[1:] + t[:-1])
    for k, mid in enumerate(mids, start=1):
        out[k] = u.value_at(mid)
    return out


def integrate_on_grid(
    rhs: Callable[[float, np.ndarray, np.ndarray], np.ndarray],
    y0: np.ndarray,
    t: np.ndarray,
    segment: np.ndarray,
    controls: np.ndarray,
    overflow_guard: float = DEFAULTS.overflow_guard,
    label: str = "integration",
) -> np.ndarray:
    """RK4 along a segmented grid; duplicated nodes carry the state over"""
    y0 = np.asarray(y0, dtype=float)
    Y = np.empty((t.size,) + y0.shape)
    Y[0] = y0
    for k in range(1, t.size):
        if segment[k] != segment[k - 1] or t[k] == t[k - 1]:
            Y[k] = Y[k - 1]
            continue
        uk = controls[k]
        Y[k] = rk4_step(lambda tt, yy: rhs(tt, yy, uk), t[k - 1], Y[k - 1], t[k] - t[k - 1])
        if not np.all(np.isfinite(Y[k])) or np.max(np.abs(Y[k]), initial=0.0) > overflow_guard:
            raise DivergenceError(f"{label} diverged", last_time=float(t[k - 1]))
    return Y


def integrate_base(
    problem: ControlProblem,
    u: PiecewiseControl,
    x0,
    steps_per_segment: int = DEFAULTS.steps_per_segment,
    overflow_guard: float = DEFAULTS.overflow_guard,
) -> SampledPath:
    """xdot = rho(x) f(x, u(t)) by fixed-step RK4 in every control segment"""
    x0 = problem.alg.point(x0)
    if u.dim != problem.U.dim:
        raise DimensionError(f"control has dimension {u.dim}, problem expects {problem.U.dim}")
    n = problem.n
    t, segment = control_grid(u, steps_per_segment)
    controls = step_controls(u, t)

    def rhs(_t, y, uk):
        x = y[:n]
        out = [problem.velocity(x, uk)]
        if problem.has_cost:
            out.append([problem.cost(x, uk)])
        return np.concatenate(out)

    y0 = np.append(x0, 0.0) if problem.has_cost else x0
    Y = integrate_on_grid(rhs, y0, t, segment, controls, overflow_guard, label=problem.name)

    node_u = node_controls(u, t, segment)
    a = np.array([problem.fiber_field(Y[k, :n], node_u[k]) for k in range(t.size)])
    logger.debug("integrated {} over {} segments ({} nodes)", problem.name, u.n_segments, t.size)
    return SampledPath(
        t=t,
        x=Y[:, :n],
        a=a,
        segment=segment,
        cost=Y[:, n] if problem.has_cost else None,
        u=node_u,
    )


def node_controls(u: PiecewiseControl, t: np.ndarray, segment: np.ndarray) -> np.ndarray:
    """Control value seen at every node from inside its own segment"""
    out = step_controls(u, t)
    for sl in segment_slices(segment):
        if sl.stop - sl.start > 1:
            out[sl.start] = out[sl.start + 1]
    return out


def admissibility_residual(alg: LocalAlgebroid, path: SampledPath, order: int = 2) -> float:
    """max |rho(x) a - dx/dt| with derivatives taken inside segments"""
    if path.a is None:
        raise AdmissibilityError("path carries no algebroid samples", residual=np.inf)
    if alg.n == 0:
        return 0.0
    x_dot = segmented_derivative(path.t, path.x, path.segment, order=order)
    rho_a = np.array([alg.rho(x) @ a for x, a in zip(path.x, path.a)])
    return sup_norm(rho_a - x_dot)


def reparametrize(
    path: SampledPath,
    h: Callable[[float], float],
    dh: Optional[Callable[[float], float]] = None,
    interval: Tuple[float, float] = (0.0, 1.0),
    check_nodes: int = 1001,
    tol: float = DEFAULTS.tol_join,
) -> SampledPath:
    """Path over the new time tau with x~ = x(h(tau)) and a~ = h'(tau) a(h(tau)).

    ``h`` must be C^1 and strictly monotone on ``interval`` and map it onto
    [t0, t1] (in either orientation). Values are interpolated by cubic
    splines inside the control segments.
    """
    lo, hi = interval
    probe = np.linspace(lo, hi, check_nodes)
    hv = np.array([h(s) for s in probe])
    if dh is None:
        step = 1e-6 * (hi - lo)
        dh = lambda s: (h(s + step) - h(s - step)) / (2.0 * step)
    dv = np.array([dh(s) for s in probe])

    increasing = hv[-1] > hv[0]
    diffs = np.diff(hv)
    if not (np.all(diffs > 0) if increasing else np.all(diffs < 0)):
        raise ReparametrizationError("time change is not strictly monotone")
    if np.min(np.abs(dv)) <= 1e-12:
        raise ReparametrizationError("time change has a vanishing derivative")
    ends = (hv[0], hv[-1]) if increasing else (hv[-1], hv[0])
    if abs(ends[0] - path.t0) > tol or abs(ends[1] - path.t1) > tol:
        raise ReparametrizationError(f"time change maps onto [{ends[0]}, {ends[1]}], path lives on [{path.t0}, {path.t1}]")

    def inverse(target: float) -> float:
        g = lambda s: h(s) - target
        if abs(g(lo)) <= 1e-15:
            return lo
        if abs(g(hi)) <= 1e-15:
            return hi
        a, b = bisect_root(g, lo, hi, tol=1e-14 * max(1.0, abs(hi - lo)))
        return 0.5 * (a + b)

    x_of = SegmentInterpolant(path.t, path.x, path.segment)
    a_of = SegmentInterpolant(path.t, path.a, path.segment) if path.a is not None else None

    slices = list(segment_slices(path.segment))
    order = slices if increasing else slices[::-1]
    ts, xs, As, segs = [], [], [], []
    for new_id, sl in enumerate(order):
        seg_id = int(path.segment[sl.start])
        t_lo, t_hi = path.t[sl.start], path.t[sl.stop - 1]
        s_a, s_b = sorted((inverse(t_lo), inverse(t_hi)))
        taus = np.linspace(s_a, s_b, sl.stop - sl.start)
        for tau in taus:
            orig = min(max(h(tau), t_lo), t_hi)
            ts.append(tau)
            xs.append(x_of.piece(seg_id)(orig))
            if a_of is not None:
                As.append(dh(tau) * np.asarray(a_of.piece(seg_id)(orig)))
            segs.append(new_id)

    return SampledPath(
        t=np.array(ts),
        x=np.array(xs).reshape(len(ts), path.n),
        a=np.array(As).reshape(len(ts), path.m) if a_of is not None else None,
        segment=np.array(segs),
    )


def compose(path1: SampledPath, path2: SampledPath, tol_join: float = DEFAULTS.tol_join) -> SampledPath:
    """Concatenate two composable paths; path2 is shifted to start at path1's end"""
    gap = float(np.linalg.norm(path1.x_final - path2.x[0])) if path1.n else 0.0
    if gap > tol_join:
        raise JoinMismatchError("paths are not composable", gap=gap)
    if path1.m != path2.m or path1.n != path2.n:
        raise DimensionError("paths live on different algebroids")

    shift = path1.t1 - path2.t0
    seg2 = path2.segment - path2.segment.min() + path1.segment.max() + 1
    cost = None
    if path1.cost is not None and path2.cost is not None:
        cost = np.concatenate([path1.cost, path2.cost - path2.cost[0] + path1.cost[-1]])
    u = None
    if path1.u is not None and path2.u is not None:
        u = np.concatenate([path1.u, path2.u])
    a = None
    if path1.a is not None and path2.a is not None:
        a = np.concatenate([path1.a, path2.a])
    return SampledPath(
        t=np.concatenate([path1.t, path2.t + shift]),
        x=np.concatenate([path1.x, path2.x]),
        a=a,
        segment=np.concatenate([path1.segment, seg2]),
        cost=cost,
        u=u,
    )


def null_path(alg: LocalAlgebroid, x, t0: float, t1: float, nodes: int = 2) -> SampledPath:
    """Zero section over the constant base path at ``x``"""
    x = alg.point(x)
    t = np.linspace(t0, t1, nodes)
    return SampledPath(
        t=t,
        x=np.tile(x, (nodes, 1)),
        a=np.zeros((nodes, alg.m)),
        segment=np.zeros(nodes, dtype=int),
        cost=np.zeros(nodes),
    )


def path_to_frame(path: SampledPath) -> pd.DataFrame:
    """Columns t, x_1..x_n, a_1..a_m and cost when present"""
    data = {"t": path.t}
    for i in range(path.n):
        data[f"x_{i + 1}"] = path.x[:, i]
    for i in range(path.m):
        data[f"a_{i + 1}"] = path.a[:, i]
    if path.cost is not None:
        data["cost"] = path.cost
    return pd.DataFrame(data)


def lipschitz_estimate(
    problem: ControlProblem,
    u: PiecewiseControl,
    x0,
    delta: float = 1e-4,
    steps_per_segment: int = DEFAULTS.steps_per_segment,
) -> float:
    """Empirical max |x(t1; x0 + d) - x(t1; x0)| / |d| over coordinate kicks"""
    x0 = problem.alg.point(x0)
    if problem.n == 0:
        return 0.0
    ref = integrate_base(problem, u, x0, steps_per_segment).x_final
    worst = 0.0
    for a in range(problem.n):
        for sign in (1.0, -1.0):
            kick = np.zeros(problem.n)
            kick[a] = sign * delta
            moved = integrate_base(problem, u, x0 + kick, steps_per_segment).x_final
            worst = max(worst, float(np.linalg.norm(moved - ref)) / delta)
    return worst
