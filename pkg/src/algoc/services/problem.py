"""
Control Problem Service
Control sets, control systems with cost, and the Pontryagin Hamiltonian
"""

import itertools
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional, Sequence

import numpy as np
from loguru import logger

from ..config.settings import DEFAULTS
from ..utils.errors import ConfigError, ControlDomainError, DimensionError
from ..utils.numerics import central_jacobian
from .algebroid import LocalAlgebroid, product_algebroid, tangent_algebroid

FiberMap = Callable[[np.ndarray, np.ndarray], np.ndarray]
CostMap = Callable[[np.ndarray, np.ndarray], float]
HookFn = Callable[[np.ndarray, np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class ControlSet:
    """Finite list of points, a box sampled on a grid, or an analytic argmax hook"""

    kind: str
    dim: int
    points: Optional[np.ndarray] = None
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    resolution: int = 21
    hook: Optional[HookFn] = None

    @classmethod
    def finite(cls, points: Sequence) -> "ControlSet":
        pts = np.asarray(points, dtype=float)
        if pts.size == 0:
            raise ControlDomainError("finite control set is empty")
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        return cls(kind="finite", dim=pts.shape[1], points=pts)

    @classmethod
    def box(cls, lower: Sequence[float], upper: Sequence[float], resolution: int = 21) -> "ControlSet":
        lo = np.atleast_1d(np.asarray(lower, dtype=float))
        hi = np.atleast_1d(np.asarray(upper, dtype=float))
        if lo.shape != hi.shape or np.any(hi < lo):
            raise ControlDomainError(f"invalid box bounds {lo} .. {hi}")
        if resolution < 2:
            raise ControlDomainError("box resolution must be at least 2")
        return cls(kind="box", dim=lo.size, lower=lo, upper=hi, resolution=int(resolution))

    @classmethod
    def from_hook(cls, hook: HookFn, dim: int) -> "ControlSet":
        if not callable(hook):
            raise ControlDomainError("argmax hook must be callable")
        return cls(kind="hook", dim=int(dim), hook=hook)

    def candidates(self) -> np.ndarray:
        """Finite points, or the box grid in lexicographic order"""
        if self.kind == "finite":
            return self.points
        if self.kind == "box":
            axes = [np.linspace(lo, hi, self.resolution) for lo, hi in zip(self.lower, self.upper)]
            return np.array(list(itertools.product(*axes)))
        raise ControlDomainError("a hook control set has no candidate list")

    def probes(self) -> np.ndarray:
        """Default needle probe values: all finite points, or face centres of the box"""
        if self.kind == "finite":
            return self.points
        if self.kind == "box":
            centre = 0.5 * (self.lower + self.upper)
            out = []
            for axis in range(self.dim):
                for bound in (self.lower[axis], self.upper[axis]):
                    p = centre.copy()
                    p[axis] = bound
                    out.append(p)
            return np.array(out)
        return np.zeros((0, self.dim))

    def contains(self, u, tol: float = 1e-12) -> bool:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if u.size != self.dim:
            return False
        if self.kind == "finite":
            return bool(np.any(np.all(np.abs(self.points - u) <= tol, axis=1)))
        if self.kind == "box":
            return bool(np.all(u >= self.lower - tol) and np.all(u <= self.upper + tol))
        return True


@dataclass(frozen=True)
class ControlProblem:
    """Control system f(x, u) on an algebroid with running cost L(x, u).

    ``df_dx(x, u)[i, a]`` and ``dL_dx(x, u)[a]`` are optional; central
    differences are used when they are missing.
    """

    alg: LocalAlgebroid
    f: FiberMap
    U: ControlSet
    L: Optional[CostMap] = None
    df_dx: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    dL_dx: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    name: str = "problem"
    params: Dict[str, Any] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.alg.n

    @property
    def m(self) -> int:
        return self.alg.m

    @property
    def has_cost(self) -> bool:
        return self.L is not None

    def control(self, u) -> np.ndarray:
        arr = np.atleast_1d(np.asarray(u, dtype=float)).reshape(-1)
        if arr.size != self.U.dim:
            raise DimensionError(f"{self.name}: control has {arr.size} entries, expected {self.U.dim}")
        return arr

    def fiber_field(self, x, u) -> np.ndarray:
        value = np.asarray(self.f(np.asarray(x, dtype=float), self.control(u)), dtype=float).reshape(-1)
        if value.size != self.m:
            raise DimensionError(f"{self.name}: f returned {value.size} entries, expected {self.m}")
        return value

    def cost(self, x, u) -> float:
        if self.L is None:
            return 0.0
        return float(self.L(np.asarray(x, dtype=float), self.control(u)))

    def jac_f(self, x, u) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.n == 0:
            return np.zeros((self.m, 0))
        if self.df_dx is not None:
            return np.asarray(self.df_dx(x, self.control(u)), dtype=float).reshape(self.m, self.n)
        return central_jacobian(lambda z: self.fiber_field(z, u), x, self.alg.fd_step)

    def grad_L(self, x, u) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.n == 0 or self.L is None:
            return np.zeros(self.n)
        if self.dL_dx is not None:
            return np.asarray(self.dL_dx(x, self.control(u)), dtype=float).reshape(self.n)
        return central_jacobian(lambda z: np.atleast_1d(self.cost(z, u)), x, self.alg.fd_step)[0]

    def velocity(self, x, u) -> np.ndarray:
        """Base velocity rho(x) f(x, u)"""
        return self.alg.rho(x) @ self.fiber_field(x, u)

    def lift_matrix(self, x, u, extended: bool = False) -> np.ndarray:
        """Matrix A(x, u) of the complete lift of f_u: bdot = A b.

        A = (df/dx) rho + c(., f); the extended version appends the cost
        row (dL/dx) rho acting on the algebroid part.
        """
        rho, c = self.alg.rho(x), self.alg.c(x)
        fval = self.fiber_field(x, u)
        A = self.jac_f(x, u) @ rho + np.einsum("ijk,k->ij", c, fval)
        if not extended:
            return A
        out = np.zeros((self.m + 1, self.m + 1))
        out[: self.m, : self.m] = A
        out[self.m, : self.m] = self.grad_L(x, u) @ rho
        return out

    def bold_field(self, x, u) -> np.ndarray:
        """(f(x, u), L(x, u)), the extended control field"""
        return np.append(self.fiber_field(x, u), self.cost(x, u))


def extend_system(problem: ControlProblem) -> ControlProblem:
    """Same system on alg x TR with the cost appended as the last coordinate"""
    alg_ext = product_algebroid(problem.alg, tangent_algebroid(1))
    n, m = problem.n, problem.m

    def f(x, u):
        return problem.bold_field(x[:n], u)

    def df_dx(x, u):
        out = np.zeros((m + 1, n + 1))
        out[:m, :n] = problem.jac_f(x[:n], u)
        out[m, :n] = problem.grad_L(x[:n], u)
        return out

    return ControlProblem(
        alg=alg_ext,
        f=f,
        U=problem.U,
        L=None,
        df_dx=df_dx,
        name=f"{problem.name}[extended]",
        params={**problem.params, "extended_from": problem.name},
    )


def time_augment(
    alg: LocalAlgebroid,
    f: Callable[[np.ndarray, float, np.ndarray], np.ndarray],
    U: ControlSet,
    L: Optional[Callable[[np.ndarray, float, np.ndarray], float]] = None,
    name: str = "nonautonomous",
) -> ControlProblem:
    """Autonomous problem on alg x TR with a clock coordinate z, zdot = 1"""
    n = alg.n
    alg_aug = product_algebroid(alg, tangent_algebroid(1))

    def f_aug(x, u):
        return np.append(np.asarray(f(x[:n], float(x[n]), u), dtype=float), 1.0)

    L_aug = None
    if L is not None:
        L_aug = lambda x, u: float(L(x[:n], float(x[n]), u))

    return ControlProblem(
        alg=alg_aug,
        f=f_aug,
        U=U,
        L=L_aug,
        name=f"{name}[clock]",
        params={"clock_index": n, "clock_fiber_index": alg.m},
    )


def hamiltonian(problem: ControlProblem, x, xi, xi0: float, u) -> float:
    """H(x, xi, u) = <f(x, u), xi> + xi0 L(x, u)"""
    xi = np.asarray(xi, dtype=float)
    return float(problem.fiber_field(x, u) @ xi + xi0 * problem.cost(x, u))


@dataclass(frozen=True)
class HamiltonianMax:
    """Result of maximizing H over the control set"""

    u: np.ndarray
    value: float
    gap: float
    degenerate: bool
    index: int = -1


def hamiltonian_values(problem: ControlProblem, x, xi, xi0: float, candidates: np.ndarray) -> np.ndarray:
    return np.array([hamiltonian(problem, x, xi, xi0, v) for v in candidates])


def maximize_hamiltonian(
    problem: ControlProblem,
    x,
    xi,
    xi0: float,
    tie_tol: float = DEFAULTS.singular_gap_tol,
) -> HamiltonianMax:
    """Argmax of H over U; ties within ``tie_tol`` go to the smallest index"""
    U = problem.U
    if U.kind == "hook":
        if xi0 == 0.0 and problem.has_cost:
            logger.debug("hook maximization with abnormal multiplier for {}", problem.name)
        u = problem.control(U.hook(np.asarray(x, dtype=float), np.asarray(xi, dtype=float), xi0))
        return HamiltonianMax(u=u, value=hamiltonian(problem, x, xi, xi0, u), gap=np.inf, degenerate=False)

    cands = U.candidates()
    if len(cands) == 0:
        raise ControlDomainError(f"{problem.name}: empty control set")
    values = hamiltonian_values(problem, x, xi, xi0, cands)
    best = float(values.max())
    idx = int(np.flatnonzero(values >= best - tie_tol)[0])
    others = np.delete(values, idx)
    gap = float(values[idx] - others.max()) if others.size else np.inf
    return HamiltonianMax(
        u=cands[idx].copy(),
        value=float(values[idx]),
        gap=gap,
        degenerate=gap < tie_tol,
        index=idx,
    )


def check_control_in(problem: ControlProblem, values: np.ndarray) -> None:
    """Raise ControlDomainError for any control value outside U"""
    for v in np.atleast_2d(values):
        if not problem.U.contains(v, tol=1e-9):
            raise ControlDomainError(f"{problem.name}: control value {list(v)} is not in U")


def require_normal(xi0: float) -> None:
    if xi0 not in (0.0, -1.0):
        raise ConfigError(f"abnormal multiplier must be normalized to 0 or -1, got {xi0}")

