"""
Problem Presets
Control problems used by the built-in scenarios and the config files
"""

from typing import Callable, Dict, Optional, Sequence

import numpy as np

from ..utils.errors import ConfigError, DimensionError
from ..services.algebroid import LocalAlgebroid
from ..services.problem import ControlProblem, ControlSet


def _as_rows(value, cols: Optional[int] = None) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(value, dtype=float))
    if cols is not None and arr.shape[1] != cols:
        arr = arr.reshape(-1, cols)
    return arr


def two_axis_problem(
    alg: LocalAlgebroid,
    a: Sequence[float],
    b: Sequence[float],
    U: Sequence = (-1.0, 1.0),
    time_cost: float = 1.0,
) -> ControlProblem:
    """f(u) = a + u b on a Lie algebra with constant running cost (time-optimal)"""
    a = alg.fiber(a)
    b = alg.fiber(b)
    zero_jac = np.zeros((alg.m, alg.n))

    return ControlProblem(
        alg=alg,
        f=lambda x, u: a + u[0] * b,
        U=ControlSet.finite(np.asarray(U, dtype=float).reshape(-1, 1)),
        L=lambda x, u: time_cost,
        df_dx=lambda x, u: zero_jac,
        dL_dx=lambda x, u: np.zeros(alg.n),
        name="two_axis",
        params={"a": a.tolist(), "b": b.tolist(), "time_cost": time_cost},
    )


def quadratic_problem(
    alg: LocalAlgebroid,
    inertia: Optional[Sequence] = None,
    active: Optional[Sequence[int]] = None,
) -> ControlProblem:
    """Fully actuated directions ``active`` with cost u.I.u/2 and the analytic argmax u = I^-1 xi"""
    active = list(range(alg.m)) if active is None else [int(i) for i in active]
    r = len(active)
    inertia = np.eye(r) if inertia is None else _as_rows(inertia, r)
    if inertia.shape != (r, r):
        raise DimensionError(f"inertia has shape {inertia.shape}, expected {(r, r)}")
    if not np.allclose(inertia, inertia.T) or np.linalg.eigvalsh(inertia).min() <= 0:
        raise ConfigError("inertia must be symmetric positive definite")
    embed = np.zeros((alg.m, r))
    embed[active, np.arange(r)] = 1.0
    zero_jac = np.zeros((alg.m, alg.n))

    def hook(x, xi, xi0):
        if xi0 >= 0.0:
            raise ConfigError("quadratic cost needs the normal multiplier xi0 = -1")
        return np.linalg.solve(-xi0 * inertia, embed.T @ xi)

    return ControlProblem(
        alg=alg,
        f=lambda x, u: embed @ u,
        U=ControlSet.from_hook(hook, r),
        L=lambda x, u: 0.5 * float(u @ inertia @ u),
        df_dx=lambda x, u: zero_jac,
        dL_dx=lambda x, u: np.zeros(alg.n),
        name="quadratic",
        params={"inertia": inertia.tolist(), "active": active},
    )


def lqr_problem(alg: LocalAlgebroid, a: float = 0.5, q: float = 1.0, r: float = 1.0) -> ControlProblem:
    """xdot = a x + u with cost (q x^2 + r u^2)/2 on TR"""
    if alg.n != 1 or alg.m != 1:
        raise DimensionError("the scalar LQ problem lives on TR")
    if r <= 0:
        raise ConfigError("control weight r must be positive")

    def hook(x, xi, xi0):
        if xi0 >= 0.0:
            raise ConfigError("LQ problem needs the normal multiplier xi0 = -1")
        return np.array([xi[0] / (-xi0 * r)])

    return ControlProblem(
        alg=alg,
        f=lambda x, u: np.array([a * x[0] + u[0]]),
        U=ControlSet.from_hook(hook, 1),
        L=lambda x, u: 0.5 * (q * x[0] ** 2 + r * u[0] ** 2),
        df_dx=lambda x, u: np.array([[a]]),
        dL_dx=lambda x, u: np.array([q * x[0]]),
        name="lqr",
        params={"a": a, "q": q, "r": r},
    )


def pendulum_problem(alg: LocalAlgebroid, bound: float = 1.0, resolution: int = 3) -> ControlProblem:
    """Forced pendulum on TR^2: f = (x2, u - sin x1), cost u^2/2, U = [-bound, bound]"""
    if alg.n != 2 or alg.m != 2:
        raise DimensionError("the pendulum lives on TR^2")

    return ControlProblem(
        alg=alg,
        f=lambda x, u: np.array([x[1], u[0] - np.sin(x[0])]),
        U=ControlSet.box([-bound], [bound], resolution),
        L=lambda x, u: 0.5 * u[0] ** 2,
        df_dx=lambda x, u: np.array([[0.0, 1.0], [-np.cos(x[0]), 0.0]]),
        dL_dx=lambda x, u: np.zeros(2),
        name="pendulum",
        params={"bound": bound, "resolution": resolution},
    )


PROBLEM_BUILDERS: Dict[str, Callable[..., ControlProblem]] = {
    "two_axis": two_axis_problem,
    "quadratic": quadratic_problem,
    "lqr": lqr_problem,
    "pendulum": pendulum_problem,
}


def build_problem(name: str, alg: LocalAlgebroid, **params) -> ControlProblem:
    if name not in PROBLEM_BUILDERS:
        raise ConfigError(f"unknown problem '{name}'; known: {', '.join(sorted(PROBLEM_BUILDERS))}")
    try:
        return PROBLEM_BUILDERS[name](alg, **params)
    except TypeError as exc:
        raise ConfigError(f"problem '{name}': {exc}") from exc
