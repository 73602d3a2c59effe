"""
Transport Service
Parallel transport of fiber vectors and costates along a controlled trajectory
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from loguru import logger

from ..config.settings import DEFAULTS
from ..utils.errors import DimensionError
from ..utils.numerics import rk4_step
from .dynamics import (
    PiecewiseControl,
    SampledPath,
    integrate_on_grid,
    node_controls,
    step_controls,
)
from .problem import ControlProblem, hamiltonian, maximize_hamiltonian


@dataclass(frozen=True)
class FiberPath:
    """Fiber vector b(t) over the nodes of a base path (m or m + 1 columns)"""

    t: np.ndarray
    x: np.ndarray
    b: np.ndarray
    segment: np.ndarray

    @property
    def b_final(self) -> np.ndarray:
        return self.b[-1]


@dataclass(frozen=True)
class CostateTrajectory:
    """Samples of (x, xi) along an extremal candidate with the constant multiplier xi0.

    ``H`` is the Hamiltonian of the applied control at every node and ``gap``
    the argmax margin certificate of ``maximize_hamiltonian`` (inf for hooks).
    ``grid_node`` marks the nodes of the uniform grid when switch nodes were
    inserted.
    """

    t: np.ndarray
    x: np.ndarray
    xi: np.ndarray
    xi0: float
    u: np.ndarray
    H: np.ndarray
    gap: np.ndarray
    segment: np.ndarray
    switch_times: Tuple[float, ...] = ()
    a: Optional[np.ndarray] = None
    cost: Optional[np.ndarray] = None
    grid_node: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return self.x.shape[1]

    @property
    def m(self) -> int:
        return self.xi.shape[1]

    @property
    def t0(self) -> float:
        return float(self.t[0])

    @property
    def t1(self) -> float:
        return float(self.t[-1])

    def bold(self, k: int = -1) -> np.ndarray:
        """(xi, xi0) at node k"""
        return np.append(self.xi[k], self.xi0)

    def path(self) -> SampledPath:
        return SampledPath(t=self.t, x=self.x, a=self.a, segment=self.segment, cost=self.cost, u=self.u)


def _check_inputs(problem: ControlProblem, u: PiecewiseControl, path: SampledPath) -> None:
    if path.n != problem.n:
        raise DimensionError(f"{problem.name}: path has {path.n} base coordinates, expected {problem.n}")
    if u.dim != problem.U.dim:
        raise DimensionError(f"{problem.name}: control has dimension {u.dim}, expected {problem.U.dim}")


def _bold_vector(problem: ControlProblem, b) -> np.ndarray:
    b = np.asarray(b, dtype=float).reshape(-1)
    if b.size == problem.m:
        return np.append(b, 0.0)
    if b.size == problem.m + 1:
        return b
    raise DimensionError(f"{problem.name}: fiber vector has {b.size} entries, expected {problem.m} or {problem.m + 1}")


def costate_velocity(problem: ControlProblem, x, xi, xi0: float, u) -> np.ndarray:
    """xidot = -A(x, u)^T xi - xi0 rho^T dL/dx"""
    out = -problem.lift_matrix(x, u).T @ np.asarray(xi, dtype=float)
    if xi0 != 0.0 and problem.has_cost:
        out = out - xi0 * (problem.alg.rho(x).T @ problem.grad_L(x, u))
    return out


def parallel_transport(
    problem: ControlProblem,
    u: PiecewiseControl,
    path: SampledPath,
    b_init,
    overflow_guard: float = DEFAULTS.overflow_guard,
) -> FiberPath:
    """b(t) = B_{t t0} b_init by RK4 of bdot = A(x, u) b jointly with the base.

    A ``b_init`` with m + 1 entries is transported on the extended system, so
    its last slot picks up the cost derivative (dL/dx) rho b.
    """
    _check_inputs(problem, u, path)
    b_init = np.asarray(b_init, dtype=float).reshape(-1)
    extended = b_init.size == problem.m + 1
    if not extended and b_init.size != problem.m:
        raise DimensionError(f"{problem.name}: b_init has {b_init.size} entries, expected {problem.m}")
    n = problem.n

    def rhs(_t, y, uk):
        x = y[:n]
        A = problem.lift_matrix(x, uk, extended=extended)
        return np.concatenate([problem.velocity(x, uk), A @ y[n:]])

    controls = step_controls(u, path.t)
    Y = integrate_on_grid(
        rhs, np.concatenate([path.x[0], b_init]), path.t, path.segment, controls,
        overflow_guard, label=f"{problem.name} transport",
    )
    return FiberPath(t=path.t, x=Y[:, :n], b=Y[:, n:], segment=path.segment)


def costate_transport(
    problem: ControlProblem,
    u: PiecewiseControl,
    path: SampledPath,
    xi_init,
    xi0: float = -1.0,
    at: str = "start",
    with_gap: bool = True,
    overflow_guard: float = DEFAULTS.overflow_guard,
) -> CostateTrajectory:
    """xi(t) = B*_{t t0} xi_init with xi0 held constant.

    With ``at="end"`` the covector is prescribed at t1; it is carried back to
    t0 by the transpose of the extended fundamental matrix and then
    integrated forward like any other initial value.
    """
    _check_inputs(problem, u, path)
    xi_init = problem.alg.fiber(xi_init)
    xi0 = float(xi0)
    n, m = problem.n, problem.m

    if at == "end":
        flow = TransportFlow(problem, u, path, overflow_guard)
        xi_start = flow.pullback(np.append(xi_init, xi0))[:m]
    elif at == "start":
        xi_start = xi_init
    else:
        raise ValueError(f"at must be 'start' or 'end', got {at!r}")

    def rhs(_t, y, uk):
        x = y[:n]
        return np.concatenate([problem.velocity(x, uk), costate_velocity(problem, x, y[n:], xi0, uk)])

    controls = step_controls(u, path.t)
    Y = integrate_on_grid(
        rhs, np.concatenate([path.x[0], xi_start]), path.t, path.segment, controls,
        overflow_guard, label=f"{problem.name} costate",
    )
    X, XI = Y[:, :n], Y[:, n:]
    node_u = node_controls(u, path.t, path.segment)
    H = np.array([hamiltonian(problem, X[k], XI[k], xi0, node_u[k]) for k in range(path.t.size)])
    if with_gap and problem.U.kind != "hook":
        gap = np.array([maximize_hamiltonian(problem, X[k], XI[k], xi0).gap for k in range(path.t.size)])
    else:
        gap = np.full(path.t.size, np.inf)

    logger.debug("costate transport for {} on {} nodes (xi0={})", problem.name, path.t.size, xi0)
    return CostateTrajectory(
        t=path.t,
        x=X,
        xi=XI,
        xi0=xi0,
        u=node_u,
        H=H,
        gap=gap,
        segment=path.segment,
        switch_times=tuple(u.switch_times),
        a=path.a,
        cost=path.cost,
    )


def pairing_drift(
    problem: ControlProblem,
    u: PiecewiseControl,
    path: SampledPath,
    b_init,
    xi_init,
    xi0: float = -1.0,
) -> float:
    """max_t |<b(t), xi(t)> + b_(t) xi0 - (same at t0)| along one joint RK4 run"""
    _check_inputs(problem, u, path)
    b_init = _bold_vector(problem, b_init)
    xi_init = problem.alg.fiber(xi_init)
    xi0 = float(xi0)
    n, m = problem.n, problem.m

    def rhs(_t, y, uk):
        x, b, xi = y[:n], y[n : n + m + 1], y[n + m + 1 :]
        A = problem.lift_matrix(x, uk, extended=True)
        return np.concatenate([problem.velocity(x, uk), A @ b, costate_velocity(problem, x, xi, xi0, uk)])

    controls = step_controls(u, path.t)
    Y = integrate_on_grid(
        rhs, np.concatenate([path.x[0], b_init, xi_init]), path.t, path.segment, controls,
        label=f"{problem.name} pairing",
    )
    B, XI = Y[:, n : n + m + 1], Y[:, n + m + 1 :]
    pairing = np.einsum("ki,ki->k", B[:, :m], XI) + B[:, m] * xi0
    return float(np.max(np.abs(pairing - pairing[0])))


class TransportFlow:
    """Fundamental matrix M(t) of the extended complete lift along a path.

    B_{t1 tau} v = M(t1) M(tau)^{-1} v. Times between grid nodes are reached by
    a partial RK4 step from the preceding node with that cell's control.
    """

    def __init__(
        self,
        problem: ControlProblem,
        u: PiecewiseControl,
        path: SampledPath,
        overflow_guard: float = DEFAULTS.overflow_guard,
    ):
        _check_inputs(problem, u, path)
        self.problem = problem
        self.u = u
        self.path = path
        self.size = problem.m + 1
        self.controls = step_controls(u, path.t)
        y0 = np.concatenate([path.x[0], np.eye(self.size).ravel()])
        self.states = integrate_on_grid(
            self._rhs, y0, path.t, path.segment, self.controls,
            overflow_guard, label=f"{problem.name} transport flow",
        )

    def _rhs(self, _t, y, uk):
        n, k = self.problem.n, self.size
        x = y[:n]
        A = self.problem.lift_matrix(x, uk, extended=True)
        return np.concatenate([self.problem.velocity(x, uk), (A @ y[n:].reshape(k, k)).ravel()])

    def state_at(self, t: float) -> Tuple[np.ndarray, np.ndarray]:
        """(x(t), M(t))"""
        path = self.path
        if not path.t0 - 1e-12 <= t <= path.t1 + 1e-12:
            raise ValueError(f"t={t} lies outside [{path.t0}, {path.t1}]")
        if t <= path.t0:
            y = self.states[0]
        else:
            k = path.node_before(t)
            h = t - path.t[k]
            uk = self.controls[k + 1]
            y = rk4_step(lambda tt, yy: self._rhs(tt, yy, uk), path.t[k], self.states[k], h)
        n, size = self.problem.n, self.size
        return y[:n], y[n:].reshape(size, size)

    @property
    def final_matrix(self) -> np.ndarray:
        n, size = self.problem.n, self.size
        return self.states[-1, n:].reshape(size, size)

    def transport(self, tau: float, v) -> np.ndarray:
        """B_{t1 tau} v on the extended fiber"""
        v = _bold_vector(self.problem, v)
        _, M_tau = self.state_at(tau)
        return self.final_matrix @ np.linalg.solve(M_tau, v)

    def transport_basis(self, vectors: Sequence) -> np.ndarray:
        """B_{t1 t0} applied to each row"""
        return np.array([self.final_matrix @ _bold_vector(self.problem, v) for v in vectors])

    def pullback(self, phi) -> np.ndarray:
        """Covector at t0 whose transport to t1 is ``phi`` (extended)"""
        return self.final_matrix.T @ _bold_vector(self.problem, phi)


def costate_trajectory_frame(traj: CostateTrajectory) -> pd.DataFrame:
    """Columns t, x_*, xi_*, xi0, H, gap"""
    data = {"t": traj.t}
    for i in range(traj.n):
        data[f"x_{i + 1}"] = traj.x[:, i]
    for i in range(traj.m):
        data[f"xi_{i + 1}"] = traj.xi[:, i]
    data["xi0"] = np.full(traj.t.size, traj.xi0)
    data["H"] = traj.H
    data["gap"] = traj.gap
    return pd.DataFrame(data)
