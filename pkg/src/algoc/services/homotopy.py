"""
Homotopy Service
Algebroid homotopies generated by one-parameter families of admissible paths
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from loguru import logger

from ..config.settings import DEFAULTS
from ..utils.errors import AdmissibilityError, DimensionError, JoinMismatchError, ReparametrizationError
from ..utils.numerics import SegmentInterpolant, derivative_along, grid_derivative, rk4_step, segment_slices, sup_norm
from .algebroid import LocalAlgebroid
from .dynamics import PiecewiseControl, SampledPath, admissibility_residual, integrate_base
from .problem import ControlProblem

Family = Union[Callable[[float], SampledPath], Sequence[SampledPath]]


@dataclass(frozen=True)
class HomotopySheet:
    """Samples x(t, s), a(t, s), b(t, s) on a rectangular (t, s) grid.

    Arrays are indexed ``[t, s, :]``; ``segment`` labels the control segments
    along t and repeats the breakpoint nodes like ``SampledPath`` does.
    """

    t: np.ndarray
    s: np.ndarray
    x: np.ndarray
    a: np.ndarray
    b: np.ndarray
    segment: np.ndarray

    @property
    def n(self) -> int:
        return self.x.shape[2]

    @property
    def m(self) -> int:
        return self.a.shape[2]

    def slice_path(self, j: int) -> SampledPath:
        """The admissible path a(., s_j)"""
        return SampledPath(t=self.t, x=self.x[:, j], a=self.a[:, j], segment=self.segment)


@dataclass(frozen=True)
class FinalPointHomotopy:
    """b(t1, .) over x(t1, .) with its sup-norm as a triviality proxy"""

    s: np.ndarray
    x: np.ndarray
    b: np.ndarray
    sup_norm: float
    statement: str


def _resolve_family(family: Family, s_grid: np.ndarray) -> List[SampledPath]:
    if callable(family):
        return [family(float(s)) for s in s_grid]
    paths = list(family)
    if len(paths) != s_grid.size:
        raise DimensionError(f"family has {len(paths)} paths for {s_grid.size} s-values")
    return paths


def _resolve_b0(b0, s_grid: np.ndarray, m: int) -> np.ndarray:
    if b0 is None:
        return np.zeros((s_grid.size, m))
    if callable(b0):
        out = np.array([np.asarray(b0(float(s)), dtype=float).reshape(-1) for s in s_grid])
    else:
        out = np.asarray(b0, dtype=float)
    if out.shape != (s_grid.size, m):
        raise DimensionError(f"initial-point homotopy has shape {out.shape}, expected {(s_grid.size, m)}")
    return out


def _integrate_slice(alg: LocalAlgebroid, t, segment, x, a, da_ds, b_start) -> np.ndarray:
    """RK4 of bdot = da/ds + c(x)(b, a) with coefficients splined inside segments"""
    n, m = alg.n, alg.m
    coeffs = SegmentInterpolant(t, np.concatenate([x, a, da_ds], axis=1), segment)
    B = np.empty((t.size, m))
    B[0] = b_start
    for k in range(1, t.size):
        if segment[k] != segment[k - 1] or t[k] == t[k - 1]:
            B[k] = B[k - 1]
            continue
        piece = coeffs.piece(segment[k])

        def rhs(tt, bb):
            row = np.asarray(piece(tt))
            xk, ak, dak = row[:n], row[n : n + m], row[n + m :]
            return dak + np.einsum("ijk,j,k->i", alg.c(xk), bb, ak)

        B[k] = rk4_step(rhs, t[k - 1], B[k - 1], t[k] - t[k - 1])
    return B


def generate_homotopy(
    alg: LocalAlgebroid,
    family: Family,
    b0,
    s_grid: Sequence[float],
    workers: int = 1,
    tol_adm: float = DEFAULTS.tol_adm,
    check: bool = True,
) -> HomotopySheet:
    """Solve d_t b = d_s a + c(x)(b, a) from b(t0, s) = b0(s) for every s.

    ``family`` is a callable ``s -> SampledPath`` or one path per s-value;
    all paths must share the same time grid. d_s a is taken by central
    differences in s (one-sided second order at the ends). Slices are
    independent and run on ``workers`` threads; the merge keeps s order.
    With ``check`` every slice and b0 over x(t0, s) must be admissible.
    """
    s_grid = np.asarray(s_grid, dtype=float)
    if s_grid.size < 2:
        raise DimensionError("a homotopy needs at least two s-values")
    paths = _resolve_family(family, s_grid)
    t, segment = paths[0].t, paths[0].segment
    for j, path in enumerate(paths):
        if path.t.shape != t.shape or np.any(path.t != t):
            raise DimensionError(f"family slice {j} uses a different time grid")
        if path.a is None or path.m != alg.m or path.n != alg.n:
            raise DimensionError(f"family slice {j} does not live on {alg.name}")
        if check:
            residual = admissibility_residual(alg, path, order=4)
            if residual > tol_adm:
                raise AdmissibilityError(f"family slice s={s_grid[j]:.6g} is not admissible", residual=residual)

    X = np.stack([p.x for p in paths], axis=1)
    A = np.stack([p.a for p in paths], axis=1)
    dA_ds = derivative_along(s_grid, A, axis=1)
    B0 = _resolve_b0(b0, s_grid, alg.m)
    if check:
        # b0 must be admissible over the initial curve s -> x(t0, s)
        start = SampledPath(t=s_grid, x=X[0], a=B0, segment=np.zeros(s_grid.size, dtype=int))
        residual = admissibility_residual(alg, start)
        if residual > tol_adm:
            raise AdmissibilityError("initial-point homotopy b0 is not admissible over x(t0, s)", residual=residual)

    def run(j: int) -> np.ndarray:
        return _integrate_slice(alg, t, segment, X[:, j], A[:, j], dA_ds[:, j], B0[j])

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            slices = list(pool.map(run, range(s_grid.size)))
    else:
        slices = [run(j) for j in range(s_grid.size)]

    logger.debug("homotopy on {} ({} x {} grid, {} workers)", alg.name, t.size, s_grid.size, workers)
    return HomotopySheet(t=t, s=s_grid, x=X, a=A, b=np.stack(slices, axis=1), segment=segment)


def _t_derivative(sheet: HomotopySheet, values: np.ndarray) -> np.ndarray:
    out = np.zeros_like(values)
    for sl in segment_slices(sheet.segment):
        out[sl] = grid_derivative(sheet.t[sl], values[sl], order=2)
    return out


def _interior_t(sheet: HomotopySheet) -> np.ndarray:
    mask = np.zeros(sheet.t.size, dtype=bool)
    for sl in segment_slices(sheet.segment):
        if sl.stop - sl.start > 2:
            mask[sl.start + 1 : sl.stop - 1] = True
    return mask


def homotopy_residual(alg: LocalAlgebroid, sheet: HomotopySheet) -> float:
    """max |d_t b - d_s a - c(x)(b, a)| on interior grid points"""
    db_dt = _t_derivative(sheet, sheet.b)
    da_ds = derivative_along(sheet.s, sheet.a, axis=1)
    bracket = np.empty_like(sheet.b)
    for k in range(sheet.t.size):
        for j in range(sheet.s.size):
            bracket[k, j] = np.einsum("ijk,j,k->i", alg.c(sheet.x[k, j]), sheet.b[k, j], sheet.a[k, j])
    residual = db_dt - da_ds - bracket
    t_mask = _interior_t(sheet)
    s_slice = slice(1, -1) if sheet.s.size > 2 else slice(None)
    return sup_norm(residual[t_mask][:, s_slice])


def anchor_compatibility_residual(alg: LocalAlgebroid, sheet: HomotopySheet) -> float:
    """max |chi| with chi = d_s x - rho(x) b"""
    if alg.n == 0:
        return 0.0
    dx_ds = derivative_along(sheet.s, sheet.x, axis=1)
    chi = np.empty_like(dx_ds)
    for k in range(sheet.t.size):
        for j in range(sheet.s.size):
            chi[k, j] = dx_ds[k, j] - alg.rho(sheet.x[k, j]) @ sheet.b[k, j]
    return sup_norm(chi)


def final_point_homotopy(sheet: HomotopySheet) -> FinalPointHomotopy:
    b1 = sheet.b[-1]
    norm = sup_norm(b1)
    if norm == 0.0:
        statement = "b(t1, .) vanishes: the end-point classes coincide"
    else:
        statement = f"b(t1, .) has sup-norm {norm:.3e}; the classes coincide iff this path is homotopically trivial"
    return FinalPointHomotopy(s=sheet.s, x=sheet.x[-1], b=b1, sup_norm=norm, statement=statement)


def family_from_initial_points(
    problem: ControlProblem,
    u: PiecewiseControl,
    x0_of_s: Callable[[float], Sequence[float]],
    s_grid: Sequence[float],
    steps_per_segment: int = DEFAULTS.steps_per_segment,
) -> List[SampledPath]:
    """Paths a(t, s) = f(x(t, s), u(t)) started from x0(s)"""
    return [integrate_base(problem, u, x0_of_s(float(s)), steps_per_segment) for s in s_grid]


def reparametrization_homotopy(
    path: SampledPath,
    h: Callable[[float], float],
    s_grid: Sequence[float],
    dh: Optional[Callable[[float], float]] = None,
) -> HomotopySheet:
    """Closed-form sheet contracting ``path`` along its own time.

    With r = t0 + (t - t0)(h(s) - t0)/T the slices are
    a(t, s) = (h(s) - t0)/T a(r) and b(t, s) = (t - t0)/T h'(s) a(r),
    both over x(r). The path must have a single control segment.
    """
    if np.unique(path.segment).size != 1:
        raise ReparametrizationError("closed-form reparametrization needs a path without switches")
    s_grid = np.asarray(s_grid, dtype=float)
    if dh is None:
        step = 1e-6
        dh = lambda s: (h(s + step) - h(s - step)) / (2.0 * step)
    t0, T = path.t0, path.t1 - path.t0
    x_of = SegmentInterpolant(path.t, path.x, path.segment)
    a_of = SegmentInterpolant(path.t, path.a, path.segment)

    N, S = path.t.size, s_grid.size
    X = np.empty((N, S, path.n))
    A = np.empty((N, S, path.m))
    B = np.empty((N, S, path.m))
    for j, s in enumerate(s_grid):
        hs, dhs = float(h(s)), float(dh(s))
        if not t0 < hs <= path.t1 + 1e-12:
            raise ReparametrizationError(f"h({s}) = {hs} leaves ({t0}, {path.t1}]")
        for k, t in enumerate(path.t):
            r = min(t0 + (t - t0) * (hs - t0) / T, path.t1)
            ar = np.asarray(a_of(r))
            X[k, j] = x_of(r)
            A[k, j] = (hs - t0) / T * ar
            B[k, j] = (t - t0) / T * dhs * ar
    return HomotopySheet(t=path.t, s=s_grid, x=X, a=A, b=B, segment=np.zeros(N, dtype=int))


def stack_sheets(first: HomotopySheet, second: HomotopySheet, tol_join: float = DEFAULTS.tol_join) -> HomotopySheet:
    """Compose two sheets in t; x and b must agree along the junction"""
    if first.s.shape != second.s.shape or np.any(first.s != second.s):
        raise DimensionError("sheets use different s grids")
    gap = max(sup_norm(first.x[-1] - second.x[0]), sup_norm(first.b[-1] - second.b[0]))
    if gap > tol_join:
        raise JoinMismatchError("sheets do not meet at the junction", gap=gap)
    shift = first.t[-1] - second.t[0]
    seg2 = second.segment - second.segment.min() + first.segment.max() + 1
    return HomotopySheet(
        t=np.concatenate([first.t, second.t + shift]),
        s=first.s,
        x=np.concatenate([first.x, second.x]),
        a=np.concatenate([first.a, second.a]),
        b=np.concatenate([first.b, second.b]),
        segment=np.concatenate([first.segment, seg2]),
    )


def sheet_to_frame(sheet: HomotopySheet) -> pd.DataFrame:
    """Long format: one row per (t, s) with x_*, a_*, b_* columns"""
    N, S = sheet.t.size, sheet.s.size
    data = {"t": np.repeat(sheet.t, S), "s": np.tile(sheet.s, N)}
    for name, arr in (("x", sheet.x), ("a", sheet.a), ("b", sheet.b)):
        flat = arr.reshape(N * S, -1)
        for i in range(flat.shape[1]):
            data[f"{name}_{i + 1}"] = flat[:, i]
    return pd.DataFrame(data)
