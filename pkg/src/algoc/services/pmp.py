"""
PMP Service
Extremal synthesis and Pontryagin maximum principle residuals
"""

from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel, Field
from scipy.integrate import cumulative_trapezoid
from scipy.optimize import brentq

from ..config.settings import DEFAULTS
from ..utils.errors import (
    ChatteringError,
    ConfigError,
    DimensionError,
    DivergenceError,
    SingularArcError,
)
from ..utils.numerics import (
    bisect_root,
    central_jacobian,
    grid_derivative,
    rk4_step,
    segment_slices,
    segmented_derivative,
    sup_norm,
    uniform_nodes,
)
from .algebroid import LocalAlgebroid, numerical_gradient
from .dynamics import PiecewiseControl, SampledPath
from .problem import (
    ControlProblem,
    hamiltonian,
    hamiltonian_values,
    maximize_hamiltonian,
    require_normal,
)
from .transport import CostateTrajectory, costate_velocity


# ---------------------------------------------------------------------------
# extremal synthesis
# ---------------------------------------------------------------------------


def _coupled_rhs(problem: ControlProblem, xi0: float):
    n, m = problem.n, problem.m

    def rhs(_t, y, uk):
        x, xi = y[:n], y[n : n + m]
        parts = [problem.velocity(x, uk), costate_velocity(problem, x, xi, xi0, uk)]
        if problem.has_cost:
            parts.append([problem.cost(x, uk)])
        return np.concatenate(parts)

    return rhs


def _guard(y: np.ndarray, t_prev: float, guard: float, label: str) -> None:
    if not np.all(np.isfinite(y)) or np.max(np.abs(y), initial=0.0) > guard:
        raise DivergenceError(f"{label} diverged", last_time=t_prev)


def free_horizon_scale(problem: ControlProblem, x0, xi, xi0: float = -1.0) -> float:
    """lambda > 0 with max_u H(x0, lambda xi, xi0, u) = 0"""
    if xi0 != -1.0:
        raise ConfigError("free-horizon normalization needs the normal multiplier xi0 = -1")
    xi = np.asarray(xi, dtype=float)
    g = lambda lam: maximize_hamiltonian(problem, x0, lam * xi, xi0).value
    if g(0.0) >= 0.0:
        raise ConfigError("free horizon needs max_u H < 0 at xi = 0 (positive running cost)")
    hi = 1.0
    for _ in range(80):
        if g(hi) > 0.0:
            break
        hi *= 2.0
    else:
        raise ConfigError("max_u <f, xi> is not positive along the costate guess; H = 0 is unreachable")
    return float(brentq(g, 0.0, hi, xtol=1e-15, rtol=1e-14))


def solve_extremal(
    problem: ControlProblem,
    x0,
    xi_guess,
    xi0: float = -1.0,
    t0: float = 0.0,
    t1: float = 1.0,
    mode: str = "fixed",
    steps: int = DEFAULTS.extremal_steps,
    tol_switch: float = DEFAULTS.tol_switch,
    max_switches: int = DEFAULTS.max_switches,
    singular_gap_tol: float = DEFAULTS.singular_gap_tol,
    overflow_guard: float = DEFAULTS.overflow_guard,
) -> Tuple[PiecewiseControl, CostateTrajectory]:
    """Integrate (x, xi) with the feedback u*(x, xi) = argmax_U H.

    Finite and box control sets hold u constant between switches; a switch
    is located by bisection on the switching function
    sigma = H(u_current) - max_{v != u_current} H(v) and inserted into the grid
    as a duplicated node. Analytic hooks are evaluated inside every RK4 stage.
    ``mode="free"`` rescales the costate guess so that H = 0 at t0.
    """
    require_normal(xi0)
    x0 = problem.alg.point(x0)
    xi_start = problem.alg.fiber(xi_guess)
    if mode == "free":
        lam = free_horizon_scale(problem, x0, xi_start, xi0)
        logger.debug("free horizon: costate guess scaled by {:.12g}", lam)
        xi_start = lam * xi_start
    elif mode != "fixed":
        raise ConfigError(f"horizon mode must be 'fixed' or 'free', got {mode!r}")
    if not t1 > t0:
        raise ConfigError(f"empty horizon [{t0}, {t1}]")
    if xi0 == 0.0 and not np.any(xi_start):
        raise ConfigError("abnormal extremals need a nonzero costate")

    y0 = np.concatenate([x0, xi_start, [0.0] if problem.has_cost else []])
    grid = uniform_nodes(t0, t1, steps)
    if problem.U.kind == "hook":
        return _solve_closed_loop(problem, y0, xi0, grid, overflow_guard)
    return _solve_switching(
        problem, y0, xi0, grid, tol_switch, max_switches, singular_gap_tol, overflow_guard
    )


def _solve_closed_loop(problem, y0, xi0, grid, guard):
    n, m = problem.n, problem.m
    rhs = _coupled_rhs(problem, xi0)
    hook = problem.U.hook

    def feedback(y):
        return problem.control(hook(y[:n], y[n : n + m], xi0))

    Y = np.empty((grid.size, y0.size))
    Y[0] = y0
    for k in range(1, grid.size):
        Y[k] = rk4_step(lambda tt, yy: rhs(tt, yy, feedback(yy)), grid[k - 1], Y[k - 1], grid[k] - grid[k - 1])
        _guard(Y[k], float(grid[k - 1]), guard, problem.name)

    U = np.array([feedback(y) for y in Y])
    control = PiecewiseControl(grid, U[1:])
    logger.debug("closed-loop extremal for {} on {} nodes", problem.name, grid.size)
    return control, _assemble(problem, grid, Y, xi0, U, np.zeros(grid.size, dtype=int), (), np.ones(grid.size, bool))


def _solve_switching(problem, y0, xi0, grid, tol_switch, max_switches, gap_tol, guard):
    n, m = problem.n, problem.m
    rhs = _coupled_rhs(problem, xi0)
    cands = problem.U.candidates()

    def sigma(y, idx):
        if len(cands) < 2:
            return np.inf
        vals = hamiltonian_values(problem, y[:n], y[n : n + m], xi0, cands)
        return float(vals[idx] - np.delete(vals, idx).max())

    def best_other(y, idx):
        vals = hamiltonian_values(problem, y[:n], y[n : n + m], xi0, cands)
        vals[idx] = -np.inf
        return int(np.argmax(vals))

    def step(t_from, y_from, t_to, idx):
        if t_to <= t_from:
            return y_from
        return rk4_step(lambda tt, yy: rhs(tt, yy, cands[idx]), t_from, y_from, t_to - t_from)

    cur = maximize_hamiltonian(problem, y0[:n], y0[n : n + m], xi0, gap_tol).index
    times, states, segs, flags = [grid[0]], [y0], [0], [True]
    values, switches = [cands[cur]], []
    seg, seg_start = 0, float(grid[0])
    t_end = float(grid[-1])

    for j in range(1, grid.size):
        tn = float(grid[j])
        count = 0
        closed = False
        while not closed:
            tc, yc = float(times[-1]), states[-1]
            y_new = step(tc, yc, tn, cur)
            _guard(y_new, tc, guard, problem.name)
            s_new = sigma(y_new, cur)
            if s_new >= 0.0:
                if s_new < gap_tol:
                    mid = step(tc, yc, 0.5 * (tc + tn), cur)
                    if abs(sigma(yc, cur)) < gap_tol and abs(sigma(mid, cur)) < gap_tol:
                        raise SingularArcError(f"{problem.name}: argmax gap vanishes over a whole step", t_start=tc)
                times.append(tn)
                states.append(y_new)
                segs.append(seg)
                flags.append(True)
                break

            sign = lambda s: 1.0 if sigma(step(tc, yc, s, cur), cur) >= 0.0 else -1.0
            _, ts = bisect_root(sign, tc, tn, tol_switch)
            if tn - ts <= tol_switch:
                ts = tn
            if ts == t_end:
                # switch at the final node: the trajectory is already complete
                times.append(tn)
                states.append(y_new)
                segs.append(seg)
                flags.append(True)
                break

            y_s = step(tc, yc, ts, cur)
            new = best_other(y_s, cur)
            count += 1
            if count > max_switches:
                raise ChatteringError(f"{problem.name}: more than {max_switches} switches inside the cell ending at t={tn:.6g}")

            if ts - seg_start <= tol_switch:
                # zero-length segment: replace its value instead of opening another one
                cur = new
                values[-1] = cands[cur]
                continue

            at_node = ts == tn
            if ts - tc > tol_switch:
                times.append(ts)
                states.append(y_s)
                segs.append(seg)
                flags.append(at_node)
            else:
                ts, y_s = tc, yc
            seg += 1
            cur = new
            seg_start = ts
            values.append(cands[cur])
            switches.append(ts)
            times.append(ts)
            states.append(y_s)
            segs.append(seg)
            flags.append(at_node or (ts == tc and flags[-1]))
            logger.debug("{}: switch at t={:.12g} to control #{}", problem.name, ts, cur)
            closed = at_node

    t = np.array(times)
    Y = np.array(states)
    segment = np.array(segs)
    U = np.array([values[s] for s in segment])
    control = PiecewiseControl(np.concatenate([[grid[0]], switches, [grid[-1]]]), np.array(values))
    logger.debug("extremal for {}: {} switches, {} nodes", problem.name, len(switches), t.size)
    return control, _assemble(problem, t, Y, xi0, U, segment, tuple(switches), np.array(flags))


def _assemble(problem, t, Y, xi0, U, segment, switch_times, grid_node) -> CostateTrajectory:
    n, m = problem.n, problem.m
    X, XI = Y[:, :n], Y[:, n : n + m]
    H = np.array([hamiltonian(problem, X[k], XI[k], xi0, U[k]) for k in range(t.size)])
    if problem.U.kind == "hook":
        gap = np.full(t.size, np.inf)
    else:
        gap = np.array([maximize_hamiltonian(problem, X[k], XI[k], xi0).gap for k in range(t.size)])
    a = np.array([problem.fiber_field(X[k], U[k]) for k in range(t.size)])
    return CostateTrajectory(
        t=t,
        x=X,
        xi=XI,
        xi0=float(xi0),
        u=U,
        H=H,
        gap=gap,
        segment=segment,
        switch_times=switch_times,
        a=a,
        cost=Y[:, n + m] if problem.has_cost else None,
        grid_node=grid_node,
    )


# ---------------------------------------------------------------------------
# residual reports
# ---------------------------------------------------------------------------


class PMPReport(BaseModel):
    """Residuals of the maximum principle along a costate trajectory"""

    max_condition_violation: float
    H_zero_violation: float
    adjoint_residual: float
    nonvanishing_ok: bool
    min_costate_norm: float
    tol: float
    h_zero_required: bool = False
    checked_nodes: int = 0
    excluded_nodes: int = 0
    passed: bool = False
    issues: List[str] = Field(default_factory=list)
    warnings: List[str] = Field(default_factory=list)

    @property
    def valid(self) -> bool:
        return self.passed


def _uniform_core(t: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """Drop leading/trailing nodes whose spacing differs from the median step"""
    if idx.size < 3:
        return idx
    steps = np.diff(t[idx])
    h = np.median(steps)
    regular = np.isclose(steps, h, rtol=1e-6, atol=0.0)
    if regular.all() or not regular.any():
        return idx
    first = int(np.argmax(regular))
    last = steps.size - int(np.argmax(regular[::-1]))
    return idx[first : last + 1]


def _cell_width(traj: CostateTrajectory) -> float:
    t = traj.t if traj.grid_node is None else traj.t[traj.grid_node]
    steps = np.diff(t)
    steps = steps[steps > 0]
    return float(np.max(steps)) if steps.size else 0.0


def pmp_residual_report(
    problem: ControlProblem,
    u: Optional[PiecewiseControl],
    traj: CostateTrajectory,
    tol: float = DEFAULTS.pmp_tol,
    h_zero: bool = False,
) -> PMPReport:
    """Maximum condition, H = 0, costate ODE defect and nonvanishing check.

    Nodes within one grid cell of a switch time are excluded. The costate
    defect uses fourth-order differences on the uniform nodes of each
    control segment.
    """
    if traj.n != problem.n or traj.m != problem.m:
        raise DimensionError(f"{problem.name}: trajectory does not live on this problem's algebroid")
    switches = set(traj.switch_times)
    if u is not None:
        switches.update(u.switch_times)
    width = _cell_width(traj)
    include = np.ones(traj.t.size, dtype=bool)
    for s in switches:
        include &= np.abs(traj.t - s) > width * (1.0 + 1e-9)

    cond, h_abs = 0.0, 0.0
    for k in np.flatnonzero(include):
        best = maximize_hamiltonian(problem, traj.x[k], traj.xi[k], traj.xi0)
        applied = hamiltonian(problem, traj.x[k], traj.xi[k], traj.xi0, traj.u[k])
        cond = max(cond, best.value - applied)
        h_abs = max(h_abs, abs(applied))

    warnings = []
    defect = 0.0
    grid_mask = np.ones(traj.t.size, bool) if traj.grid_node is None else np.asarray(traj.grid_node, bool)
    for sl in segment_slices(traj.segment):
        idx = _uniform_core(traj.t, np.arange(sl.start, sl.stop)[grid_mask[sl]])
        if idx.size < 5:
            if np.any(include[idx]):
                warnings.append(f"segment starting at t={traj.t[sl.start]:.6g} too short for the costate defect")
            continue
        xi_dot = grid_derivative(traj.t[idx], traj.xi[idx], order=4)
        for row, k in enumerate(idx):
            if not include[k]:
                continue
            expected = costate_velocity(problem, traj.x[k], traj.xi[k], traj.xi0, traj.u[k])
            defect = max(defect, float(np.max(np.abs(xi_dot[row] - expected), initial=0.0)))

    norms = np.sqrt(np.sum(traj.xi ** 2, axis=1) + traj.xi0 ** 2)
    min_norm = float(norms.min())
    nonvanishing = min_norm > 1e-12

    report = PMPReport(
        max_condition_violation=float(cond),
        H_zero_violation=float(h_abs),
        adjoint_residual=defect,
        nonvanishing_ok=nonvanishing,
        min_costate_norm=min_norm,
        tol=tol,
        h_zero_required=h_zero,
        checked_nodes=int(include.sum()),
        excluded_nodes=int((~include).sum()),
        warnings=warnings,
    )
    if cond > tol:
        report.issues.append(f"maximum condition violated by {cond:.3e}")
    if defect > tol:
        report.issues.append(f"costate equation defect {defect:.3e}")
    if h_zero and h_abs > tol:
        report.issues.append(f"H deviates from zero by {h_abs:.3e}")
    if not nonvanishing:
        report.issues.append("covector (xi, xi0) vanishes along the trajectory")
    report.passed = not report.issues
    if not report.passed:
        logger.warning("PMP residuals failed for {}: {}", problem.name, "; ".join(report.issues))
    return report


class TransversalityReport(BaseModel):
    """Annihilation of boundary subspaces by the costate"""

    start_violation: float
    end_violation: float
    extended: bool
    tol: float
    passed: bool
    issues: List[str] = Field(default_factory=list)

    @property
    def valid(self) -> bool:
        return self.passed


def _pair_all(vectors: Optional[Sequence], covector: np.ndarray, extended: bool) -> float:
    if vectors is None or len(vectors) == 0:
        return 0.0
    worst = 0.0
    for v in vectors:
        v = np.asarray(v, dtype=float).reshape(-1)
        if extended and v.size == covector.size - 1:
            v = np.append(v, 0.0)
        if v.size != covector.size:
            raise DimensionError(f"boundary vector has {v.size} entries, expected {covector.size}")
        worst = max(worst, abs(float(v @ covector)))
    return worst


def transversality_check(
    problem: ControlProblem,
    traj: CostateTrajectory,
    S0: Optional[Sequence] = None,
    S1: Optional[Sequence] = None,
    extended: bool = False,
    tol: float = DEFAULTS.pmp_tol,
) -> TransversalityReport:
    """max |<v, xi(t0)>| over S0 and |<w, xi(t1)>| over S1.

    ``extended=True`` pairs with (xi, xi0); vectors given with m entries get
    a zero cost slot.
    """
    first = traj.bold(0) if extended else traj.xi[0]
    last = traj.bold(-1) if extended else traj.xi[-1]
    start = _pair_all(S0, first, extended)
    end = _pair_all(S1, last, extended)
    report = TransversalityReport(
        start_violation=start, end_violation=end, extended=extended, tol=tol, passed=max(start, end) <= tol
    )
    if start > tol:
        report.issues.append(f"xi(t0) does not annihilate S0 ({start:.3e})")
    if end > tol:
        report.issues.append(f"xi(t1) does not annihilate S1 ({end:.3e})")
    return report


# ---------------------------------------------------------------------------
# Euler-Lagrange form and conserved quantities
# ---------------------------------------------------------------------------


def euler_lagrange_residual(
    alg: LocalAlgebroid,
    L: Optional[Callable[[np.ndarray, np.ndarray], float]],
    path: SampledPath,
    grad: Optional[Callable[[np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray]]] = None,
) -> float:
    """Max residual of xdot = rho y and d/dt dL/dy_j = c^k_{ij} y^i dL/dy_k + rho^a_j dL/dx^a"""
    if path.a is None:
        raise DimensionError("Euler-Lagrange residual needs the fiber samples y of the path")
    if grad is None:
        if L is None:
            raise ValueError("either L or its gradient must be supplied")
        grad = numerical_gradient(L, alg.fd_step)

    momenta, forces = [], []
    for x, y in zip(path.x, path.a):
        dL_dx, dL_dy = grad(x, y)
        dL_dx = np.asarray(dL_dx, dtype=float).reshape(alg.n)
        dL_dy = np.asarray(dL_dy, dtype=float).reshape(alg.m)
        momenta.append(dL_dy)
        forces.append(np.einsum("kij,i,k->j", alg.c(x), y, dL_dy) + alg.rho(x).T @ dL_dx)
    momenta, forces = np.array(momenta), np.array(forces)

    p_dot = segmented_derivative(path.t, momenta, path.segment, order=4)
    residual = sup_norm(p_dot - forces)
    if alg.n:
        x_dot = segmented_derivative(path.t, path.x, path.segment, order=4)
        rho_y = np.array([alg.rho(x) @ y for x, y in zip(path.x, path.a)])
        residual = max(residual, sup_norm(x_dot - rho_y))
    return residual


def casimir_drift(traj: CostateTrajectory) -> float:
    """max_t | |xi(t)|^2 - |xi(t0)|^2 |"""
    sq = np.sum(traj.xi ** 2, axis=1)
    return float(np.max(np.abs(sq - sq[0])))


def hamiltonian_drift(traj: CostateTrajectory) -> float:
    return float(np.max(np.abs(traj.H - traj.H[0])))


def alpha_bookkeeping(problem: ControlProblem, traj: CostateTrajectory, step: float = 1e-6) -> Dict[str, object]:
    """alpha(t) = H(t) - int dH/ds ds for a clock-augmented problem.

    H is the Hamiltonian without the clock slot and dH/ds its explicit
    derivative in the clock coordinate. Returns the alpha samples and their
    spread.
    """
    if "clock_index" not in problem.params:
        raise ConfigError(f"{problem.name} is not clock-augmented; use time_augment")
    z = problem.params["clock_index"]
    zf = problem.params["clock_fiber_index"]

    H_orig, dH_ds = [], []
    for k in range(traj.t.size):
        x, xi, uk = traj.x[k], traj.xi[k], traj.u[k]
        H_orig.append(hamiltonian(problem, x, xi, traj.xi0, uk) - xi[zf])

        def H_of_clock(v, x=x, xi=xi, uk=uk):
            moved = x.copy()
            moved[z] = v[0]
            return np.atleast_1d(hamiltonian(problem, moved, xi, traj.xi0, uk))

        dH_ds.append(central_jacobian(H_of_clock, np.array([x[z]]), step)[0, 0])
    H_orig, dH_ds = np.array(H_orig), np.array(dH_ds)
    alpha = H_orig - cumulative_trapezoid(dH_ds, traj.t, initial=0.0)
    return {"t": traj.t, "alpha": alpha, "H": H_orig, "dH_ds": dH_ds, "drift": float(np.max(alpha) - np.min(alpha))}


def morphism_residual(
    source: LocalAlgebroid,
    target: LocalAlgebroid,
    base_map: Callable[[np.ndarray], np.ndarray],
    fiber_map: Callable[[np.ndarray], np.ndarray],
    samples: Optional[Sequence] = None,
    step: float = DEFAULTS.fd_step,
) -> Dict[str, float]:
    """Local algebroid-morphism identities for (base_map, fiber_map).

    ``fiber_map(x)[i, k] = Phi^i_k(x)`` sends source fiber index k to target
    fiber index i. Anchor: Phi^i_k rho^a_i(phi) = rho~^alpha_k d phi^a/dx~^alpha.
    Bracket: Phi^i_m c~^m_{kl} = c^i_{jr}(phi) Phi^j_k Phi^r_l
    + rho~^alpha_k d_alpha Phi^i_l - rho~^alpha_l d_alpha Phi^i_k.
    """
    points = source.sample_points() if samples is None else np.asarray(samples, dtype=float).reshape(-1, source.n)
    anchor_worst, bracket_worst = 0.0, 0.0
    for x in points:
        Phi = np.asarray(fiber_map(x), dtype=float).reshape(target.m, source.m)
        y = np.asarray(base_map(x), dtype=float).reshape(target.n)
        rho_src = source.rho(x)
        if source.n:
            d_base = central_jacobian(lambda z: np.asarray(base_map(z), dtype=float).reshape(target.n), x, step)
            d_Phi = central_jacobian(lambda z: np.asarray(fiber_map(z), dtype=float).reshape(target.m, source.m), x, step)
        else:
            d_base = np.zeros((target.n, 0))
            d_Phi = np.zeros((target.m, source.m, 0))

        anchor = target.rho(y) @ Phi - d_base @ rho_src
        lhs = np.einsum("im,mkl->ikl", Phi, source.c(x))
        lie = np.einsum("ak,ila->ikl", rho_src, d_Phi)
        rhs = np.einsum("ijr,jk,rl->ikl", target.c(y), Phi, Phi) + lie - np.swapaxes(lie, 1, 2)
        anchor_worst = max(anchor_worst, sup_norm(anchor))
        bracket_worst = max(bracket_worst, sup_norm(lhs - rhs))
    return {"anchor": anchor_worst, "bracket": bracket_worst}
