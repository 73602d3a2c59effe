"""
Needle Service
Needle variations of a control and the cone of infinitesimal endpoint variations
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from loguru import logger

from ..config.settings import DEFAULTS
from ..utils.errors import NeedleError
from ..utils.numerics import segment_slices
from .dynamics import PiecewiseControl, SampledPath, integrate_base
from .problem import ControlProblem
from .transport import TransportFlow


@dataclass(frozen=True)
class NeedleEntry:
    """Value ``v`` inserted just before ``tau`` for a time ``dt`` (per unit s)"""

    tau: float
    v: np.ndarray
    dt: float


@dataclass(frozen=True)
class NeedleSymbol:
    """Entries ordered by time, the anchor time ``tau`` and the horizon change ``dt``"""

    entries: Tuple[NeedleEntry, ...]
    tau: float
    dt: float = 0.0

    def __post_init__(self):
        entries = tuple(
            NeedleEntry(float(e.tau), np.atleast_1d(np.asarray(e.v, dtype=float)), float(e.dt)) for e in self.entries
        )
        times = [e.tau for e in entries]
        if any(b < a for a, b in zip(times, times[1:])):
            raise NeedleError("needle times must be non-decreasing")
        if any(e.dt < 0 for e in entries):
            raise NeedleError("needle durations must be non-negative")
        if times and times[-1] > self.tau:
            raise NeedleError(f"needle time {times[-1]} lies after the anchor time {self.tau}")
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "tau", float(self.tau))
        object.__setattr__(self, "dt", float(self.dt))

    @classmethod
    def single(cls, tau_i: float, v, dt_i: float = 1.0, tau: Optional[float] = None, dt: float = 0.0) -> "NeedleSymbol":
        return cls((NeedleEntry(tau_i, v, dt_i),), tau=tau_i if tau is None else tau, dt=dt)

    @classmethod
    def time_shift(cls, tau: float, dt: float) -> "NeedleSymbol":
        return cls((), tau=tau, dt=dt)

    def offsets(self) -> List[float]:
        """l_i: entries sharing a time are stacked back to back, ending at tau_i"""
        out = []
        k = len(self.entries)
        for i, e in enumerate(self.entries):
            j = i
            while j + 1 < k and self.entries[j + 1].tau == e.tau:
                j += 1
            l_i = -sum(self.entries[q].dt for q in range(i, j + 1))
            if e.tau == self.tau:
                l_i += self.dt
            out.append(l_i)
        return out

    def intervals(self, s: float) -> List[Tuple[float, float]]:
        """I_i = (tau_i + s l_i, tau_i + s (l_i + dt_i)]"""
        return [(e.tau + s * l, e.tau + s * (l + e.dt)) for e, l in zip(self.entries, self.offsets())]


@dataclass
class VariationCone:
    """Generators in the extended fiber at x(t1) with the symbol behind each.

    ``lines`` lists index pairs (i, j) with generator j = -generator i.
    """

    generators: np.ndarray
    provenance: List[Dict[str, Any]] = field(default_factory=list)
    lines: List[Tuple[int, int]] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.generators.shape[1]

    def __len__(self) -> int:
        return self.generators.shape[0]


def _require_regular(u: PiecewiseControl, t: float, what: str) -> None:
    tol = 1e-9 * (u.t1 - u.t0)
    for sw in u.switch_times:
        if abs(t - sw) <= tol:
            raise NeedleError(f"{what} t={t:.12g} is a switch time of the control")


def needle_control(u: PiecewiseControl, sym: NeedleSymbol, s: float) -> PiecewiseControl:
    """Control on [t0, t1 + s dt]: v_i on I_i, u(t) up to tau + s dt, u(t - s dt) after"""
    if s < 0:
        raise NeedleError("needle parameter s must be non-negative")
    if not u.t0 < sym.tau < u.t1:
        raise NeedleError(f"anchor time {sym.tau} must lie inside ({u.t0}, {u.t1})")
    if sym.entries and not sym.entries[0].tau > u.t0:
        raise NeedleError("needle times must lie after t0")

    cut = sym.tau + s * sym.dt
    end = u.t1 + s * sym.dt
    if not u.t0 < cut < end:
        raise NeedleError(f"s={s} shifts the anchor time out of the horizon")

    intervals = [(lo, hi, e.v) for (lo, hi), e in zip(sym.intervals(s), sym.entries) if hi > lo]
    for lo, hi, _ in intervals:
        if lo < u.t0 or hi > max(sym.tau, cut):
            raise NeedleError(f"s={s} too large: interval ({lo:.6g}, {hi:.6g}] escapes [{u.t0}, {sym.tau}]")
    for (lo1, hi1, _), (lo2, hi2, _) in zip(intervals, intervals[1:]):
        if lo2 < hi1 - 1e-14:
            raise NeedleError(f"s={s} too large: intervals ({lo1:.6g}, {hi1:.6g}] and ({lo2:.6g}, {hi2:.6g}] overlap")

    points = [u.t0, end, cut]
    points += [b for b in u.breakpoints if b <= cut]
    points += [b + s * sym.dt for b in u.breakpoints if b > sym.tau]
    for lo, hi, _ in intervals:
        points += [lo, hi]
    grid = np.unique(np.clip(points, u.t0, end))
    keep = np.concatenate(([True], np.diff(grid) > 1e-13 * max(1.0, end - u.t0)))
    grid = grid[keep]
    grid[-1] = end

    values = []
    for a, b in zip(grid[:-1], grid[1:]):
        mid = 0.5 * (a + b)
        value = None
        for lo, hi, v in intervals:
            if lo < mid <= hi:
                value = v
                break
        if value is None:
            value = u.value_at(mid) if mid <= cut else u.value_at(mid - s * sym.dt)
        values.append(value)
    return PiecewiseControl(grid, np.array(values))


def infinitesimal_variation(
    problem: ControlProblem,
    u: PiecewiseControl,
    path: SampledPath,
    sym: NeedleSymbol,
    flow: Optional[TransportFlow] = None,
) -> np.ndarray:
    """d(0) = B_{t1 tau}[F(x(tau), u(tau))] dt + sum_i B_{t1 tau_i}[F(x(tau_i), v_i) - F(x(tau_i), u(tau_i))] dt_i

    F = (f, L) is the extended field; transports use the extended system.
    """
    flow = flow or TransportFlow(problem, u, path)
    _require_regular(u, sym.tau, "anchor time")
    out = np.zeros(problem.m + 1)
    if sym.dt != 0.0:
        x_tau, _ = flow.state_at(sym.tau)
        out += sym.dt * flow.transport(sym.tau, problem.bold_field(x_tau, u.value_at(sym.tau)))
    for e in sym.entries:
        if e.dt == 0.0:
            continue
        _require_regular(u, e.tau, "needle time")
        x_i, _ = flow.state_at(e.tau)
        jump = problem.bold_field(x_i, e.v) - problem.bold_field(x_i, u.value_at(e.tau))
        out += e.dt * flow.transport(e.tau, jump)
    return out


def default_probe_times(path: SampledPath, u: PiecewiseControl, tau: float, offset: Optional[float] = None) -> np.ndarray:
    """Cell midpoints up to tau plus a point on each side of every switch"""
    offset = 1e-7 * (path.t1 - path.t0) if offset is None else offset
    times = []
    for sl in segment_slices(path.segment):
        ts = path.t[sl]
        left, right = ts[:-1], ts[1:]
        mids = 0.5 * (left + right)
        times.extend(mids[(right > left) & (right <= tau + 1e-12)])
    for sw in u.switch_times:
        if path.t0 < sw - offset and sw + offset <= tau:
            times.extend([sw - offset, sw + offset])
    return np.unique(np.asarray(times, dtype=float))


def build_cone(
    problem: ControlProblem,
    u: PiecewiseControl,
    path: SampledPath,
    tau: float,
    probe_controls: Optional[Sequence] = None,
    probe_times: Optional[Sequence[float]] = None,
    flow: Optional[TransportFlow] = None,
) -> VariationCone:
    """Single-entry needle generators for every probe plus the +-time line"""
    flow = flow or TransportFlow(problem, u, path)
    probes = problem.U.probes() if probe_controls is None else np.atleast_2d(np.asarray(probe_controls, dtype=float))
    if probe_times is None:
        probe_times = default_probe_times(path, u, tau) if len(probes) else []

    generators, provenance = [], []
    for sign in (1.0, -1.0):
        generators.append(infinitesimal_variation(problem, u, path, NeedleSymbol.time_shift(tau, sign), flow))
        provenance.append({"kind": "time", "tau": tau, "dt": sign})
    lines = [(0, 1)]

    for t_i in probe_times:
        if not u.t0 < t_i <= tau:
            raise NeedleError(f"probe time {t_i} outside ({u.t0}, {tau}]")
        current = u.value_at(t_i)
        for v in probes:
            if np.allclose(v, current, rtol=0.0, atol=1e-14):
                continue
            sym = NeedleSymbol.single(t_i, v, 1.0, tau=tau)
            generators.append(infinitesimal_variation(problem, u, path, sym, flow))
            provenance.append({"kind": "needle", "tau_i": float(t_i), "v": [float(c) for c in v], "dt_i": 1.0})

    logger.debug("cone for {}: {} generators at tau={:.6g}", problem.name, len(generators), tau)
    return VariationCone(generators=np.array(generators), provenance=provenance, lines=lines)


def augment_cone(cone: VariationCone, transported: Optional[Sequence]) -> VariationCone:
    """Add +-v for every transported boundary vector"""
    if transported is None or len(transported) == 0:
        return cone
    generators = list(cone.generators)
    provenance = list(cone.provenance)
    lines = list(cone.lines)
    for v in np.atleast_2d(np.asarray(transported, dtype=float)):
        i = len(generators)
        generators.extend([v, -v])
        provenance.extend([{"kind": "subspace", "sign": 1.0}, {"kind": "subspace", "sign": -1.0}])
        lines.append((i, i + 1))
    return VariationCone(generators=np.array(generators), provenance=provenance, lines=lines)


def finite_difference_variation(
    problem: ControlProblem,
    u: PiecewiseControl,
    x0,
    sym: NeedleSymbol,
    s: float,
    steps_per_segment: int = DEFAULTS.steps_per_segment,
    base: Optional[SampledPath] = None,
) -> np.ndarray:
    """(endpoint of the varied trajectory - base endpoint) / s in base coordinates plus cost"""
    base = base or integrate_base(problem, u, x0, steps_per_segment)
    varied = integrate_base(problem, needle_control(u, sym, s), x0, steps_per_segment)
    dx = varied.x_final - base.x_final
    dcost = (varied.cost[-1] - base.cost[-1]) if problem.has_cost else 0.0
    return np.append(dx, dcost) / s


def cone_to_frame(cone: VariationCone) -> pd.DataFrame:
    """One row per generator with its provenance"""
    data: Dict[str, Any] = {}
    for i in range(cone.dim):
        data[f"g_{i + 1}"] = cone.generators[:, i] if len(cone) else []
    data["kind"] = [p.get("kind", "") for p in cone.provenance]
    data["tau"] = [p.get("tau_i", p.get("tau", np.nan)) for p in cone.provenance]
    data["v"] = [",".join(f"{c:.12g}" for c in p["v"]) if "v" in p else "" for p in cone.provenance]
    return pd.DataFrame(data)
