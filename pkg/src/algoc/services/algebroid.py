"""
Algebroid Service
Local-chart algebroids: structure functions, constructors and derived fields
"""

from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from scipy.stats import qmc

from ..config.settings import DEFAULTS
from ..utils.errors import AxiomError, DimensionError, MetricError
from ..utils.numerics import central_jacobian

ArrayFn = Callable[[np.ndarray], np.ndarray]
Box = Tuple[np.ndarray, np.ndarray]


@dataclass(frozen=True)
class LocalAlgebroid:
    """Skew-algebroid on a chart of R^n with an m-dimensional fiber.

    ``rho(x)`` returns the anchor matrix with entry ``[a, i] = rho^a_i(x)``;
    ``c(x)`` returns the bracket tensor with entry ``[i, j, k] = c^i_{jk}(x)``.
    Optional analytic derivatives append the base-derivative index last:
    ``d_rho(x)[a, i, b]`` and ``d_c(x)[i, j, k, b]``. Missing derivatives are
    taken by central finite differences with ``fd_step``.
    """

    n: int
    m: int
    rho_fn: ArrayFn
    c_fn: ArrayFn
    d_rho_fn: Optional[ArrayFn] = None
    d_c_fn: Optional[ArrayFn] = None
    domain_hint: Optional[Box] = None
    name: str = "custom"
    params: Dict[str, Any] = field(default_factory=dict)
    fd_step: float = DEFAULTS.fd_step

    def point(self, x: Optional[Sequence[float]]) -> np.ndarray:
        """Validate a base point and return it as a float array"""
        arr = np.zeros(0) if x is None else np.asarray(x, dtype=float).reshape(-1)
        if arr.size != self.n:
            raise DimensionError(f"{self.name}: base point has {arr.size} coordinates, expected {self.n}")
        return arr

    def fiber(self, y: Sequence[float]) -> np.ndarray:
        """Validate fiber coordinates and return them as a float array"""
        arr = np.asarray(y, dtype=float).reshape(-1)
        if arr.size != self.m:
            raise DimensionError(f"{self.name}: fiber vector has {arr.size} entries, expected {self.m}")
        return arr

    def rho(self, x) -> np.ndarray:
        return np.asarray(self.rho_fn(self.point(x)), dtype=float).reshape(self.n, self.m)

    def c(self, x) -> np.ndarray:
        return np.asarray(self.c_fn(self.point(x)), dtype=float).reshape(self.m, self.m, self.m)

    @property
    def analytic_derivatives(self) -> bool:
        return self.d_rho_fn is not None and self.d_c_fn is not None

    def d_rho(self, x) -> np.ndarray:
        x = self.point(x)
        if self.d_rho_fn is not None:
            return np.asarray(self.d_rho_fn(x), dtype=float).reshape(self.n, self.m, self.n)
        return central_jacobian(self.rho, x, self.fd_step)

    def d_c(self, x) -> np.ndarray:
        x = self.point(x)
        if self.d_c_fn is not None:
            return np.asarray(self.d_c_fn(x), dtype=float).reshape(self.m, self.m, self.m, self.n)
        return central_jacobian(self.c, x, self.fd_step)

    def anchor(self, x, y) -> np.ndarray:
        """Actual velocity rho(x) y of a generalized velocity y"""
        return self.rho(x) @ self.fiber(y)

    def element(self, x, y) -> "AlgebroidElement":
        return AlgebroidElement(self.point(x), self.fiber(y))

    def covector(self, x, xi) -> "AlgebroidCovector":
        return AlgebroidCovector(self.point(x), self.fiber(xi))

    def sample_points(self, count: int = DEFAULTS.axiom_samples, seed: int = DEFAULTS.sample_seed) -> np.ndarray:
        """Scrambled Halton points inside ``domain_hint`` (unit box if absent)"""
        if self.n == 0:
            return np.zeros((1, 0))
        lo, hi = self.box()
        sampler = qmc.Halton(d=self.n, scramble=True, seed=seed)
        return qmc.scale(sampler.random(count), lo, hi)

    def box(self) -> Box:
        if self.domain_hint is None:
            return -np.ones(self.n), np.ones(self.n)
        lo, hi = self.domain_hint
        return np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)


@dataclass(frozen=True)
class AlgebroidElement:
    """Point (x, y) of E in induced coordinates"""

    x: np.ndarray
    y: np.ndarray


@dataclass(frozen=True)
class AlgebroidCovector:
    """Point (x, xi) of the dual bundle E*"""

    x: np.ndarray
    xi: np.ndarray


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------


def tangent_algebroid(n: int, domain_hint: Optional[Box] = None) -> LocalAlgebroid:
    """TR^n with identity anchor and the zero bracket of coordinate fields"""
    eye = np.eye(n)
    return LocalAlgebroid(
        n=n,
        m=n,
        rho_fn=lambda x: eye,
        c_fn=lambda x: np.zeros((n, n, n)),
        d_rho_fn=lambda x: np.zeros((n, n, n)),
        d_c_fn=lambda x: np.zeros((n, n, n, n)),
        domain_hint=domain_hint,
        name=f"tangent(R^{n})",
        params={"n": n},
    )


def lie_algebra(constants: Union[Sequence, np.ndarray], name: str = "lie_algebra") -> LocalAlgebroid:
    """Lie algebra over a point; ``constants[i, j, k] = c^i_{jk}``"""
    C = np.asarray(constants, dtype=float)
    m = C.shape[0]
    if C.shape != (m, m, m):
        raise DimensionError(f"structure constants must have shape (m, m, m), got {C.shape}")
    if not np.allclose(C, -np.swapaxes(C, 1, 2), atol=1e-14):
        raise AxiomError(f"{name}: structure constants are not skew in the lower indices")
    return LocalAlgebroid(
        n=0,
        m=m,
        rho_fn=lambda x: np.zeros((0, m)),
        c_fn=lambda x: C,
        d_rho_fn=lambda x: np.zeros((0, m, 0)),
        d_c_fn=lambda x: np.zeros((m, m, m, 0)),
        name=name,
        params={"constants": C.tolist()},
    )


def _constants_from_brackets(m: int, brackets: Dict[Tuple[int, int], Dict[int, float]]) -> np.ndarray:
    C = np.zeros((m, m, m))
    for (j, k), image in brackets.items():
        for i, value in image.items():
            C[i, j, k] = value
            C[i, k, j] = -value
    return C


def se2_algebra() -> LocalAlgebroid:
    """se(2) in the basis E1, E2, E3 with [E3,E1]=E2, [E2,E3]=E1, [E1,E2]=0"""
    C = _constants_from_brackets(3, {(2, 0): {1: 1.0}, (1, 2): {0: 1.0}})
    return lie_algebra(C, name="se(2)")


def so3_algebra(sign: float = 1.0) -> LocalAlgebroid:
    """so(3) with c^k_{ij} = epsilon_{ijk}; ``sign`` multiplies the [E1,E2] component"""
    C = _constants_from_brackets(3, {(1, 2): {0: 1.0}, (2, 0): {1: 1.0}, (0, 1): {2: float(sign)}})
    return lie_algebra(C, name="so(3)" if sign == 1.0 else f"so(3)[c3_12={sign:g}]")


def deformed_so3_algebra(eps: float = 1.0) -> LocalAlgebroid:
    """[E2,E3]=E1, [E3,E1]=E2, [E1,E2]=E3+eps*E1; violates Jacobi for eps != 0"""
    C = _constants_from_brackets(3, {(1, 2): {0: 1.0}, (2, 0): {1: 1.0}, (0, 1): {2: 1.0, 0: float(eps)}})
    return lie_algebra(C, name=f"so(3)[deformed eps={eps:g}]")


def product_algebroid(a1: LocalAlgebroid, a2: LocalAlgebroid) -> LocalAlgebroid:
    """Product structure: block-diagonal anchor, bracket trivial on mixed indices"""
    n1, n2, m1, m2 = a1.n, a2.n, a1.m, a2.m
    n, m = n1 + n2, m1 + m2

    def split(x):
        return x[:n1], x[n1:]

    def rho(x):
        x1, x2 = split(x)
        out = np.zeros((n, m))
        out[:n1, :m1] = a1.rho(x1)
        out[n1:, m1:] = a2.rho(x2)
        return out

    def c(x):
        x1, x2 = split(x)
        out = np.zeros((m, m, m))
        out[:m1, :m1, :m1] = a1.c(x1)
        out[m1:, m1:, m1:] = a2.c(x2)
        return out

    def d_rho(x):
        x1, x2 = split(x)
        out = np.zeros((n, m, n))
        out[:n1, :m1, :n1] = a1.d_rho(x1)
        out[n1:, m1:, n1:] = a2.d_rho(x2)
        return out

    def d_c(x):
        x1, x2 = split(x)
        out = np.zeros((m, m, m, n))
        out[:m1, :m1, :m1, :n1] = a1.d_c(x1)
        out[m1:, m1:, m1:, n1:] = a2.d_c(x2)
        return out

    hint = None
    if a1.domain_hint is not None or a2.domain_hint is not None:
        lo1, hi1 = a1.box()
        lo2, hi2 = a2.box()
        hint = (np.concatenate([lo1, lo2]), np.concatenate([hi1, hi2]))

    analytic = a1.analytic_derivatives and a2.analytic_derivatives
    return LocalAlgebroid(
        n=n,
        m=m,
        rho_fn=rho,
        c_fn=c,
        d_rho_fn=d_rho if analytic else None,
        d_c_fn=d_c if analytic else None,
        domain_hint=hint,
        name=f"{a1.name} x {a2.name}",
        params={"factors": [a1.name, a2.name]},
        fd_step=min(a1.fd_step, a2.fd_step),
    )


def atiyah_trivialized(
    base_dim: int,
    lie_algebra_constants: Union[Sequence, np.ndarray],
    curvature: Union[ArrayFn, Sequence, np.ndarray],
    d_curvature: Optional[ArrayFn] = None,
    domain_hint: Optional[Box] = None,
) -> LocalAlgebroid:
    """Atiyah algebroid TM x g in a connection trivialization.

    ``curvature(x)[alpha, a, b] = F^alpha_{ab}(x)`` (or a constant array).
    Fiber coordinates are (X^1..X^n, a^1..a^k); the bracket of coordinate
    sections is zero on the base block, ``C`` on the g block and carries the
    curvature on [base, base] -> g.
    """
    C = np.asarray(lie_algebra_constants, dtype=float)
    k = C.shape[0]
    if C.shape != (k, k, k) or not np.allclose(C, -np.swapaxes(C, 1, 2), atol=1e-14):
        raise AxiomError("atiyah: Lie algebra constants must be skew with shape (k, k, k)")

    n, m = base_dim, base_dim + k
    constant_f = not callable(curvature)
    if constant_f:
        F_const = np.asarray(curvature, dtype=float).reshape(k, n, n)
        F = lambda x: F_const
    else:
        F = lambda x: np.asarray(curvature(x), dtype=float).reshape(k, n, n)

    probe = F(np.zeros(n))
    if not np.allclose(probe, -np.swapaxes(probe, 1, 2), atol=1e-12):
        raise AxiomError("atiyah: curvature must be antisymmetric in its base indices")

    anchor = np.zeros((n, m))
    anchor[:, :n] = np.eye(n)

    def c(x):
        out = np.zeros((m, m, m))
        out[n:, :n, :n] = F(x)
        out[n:, n:, n:] = C
        return out

    d_c = None
    if constant_f:
        d_c = lambda x: np.zeros((m, m, m, n))
    elif d_curvature is not None:
        def d_c(x):
            out = np.zeros((m, m, m, n))
            out[n:, :n, :n, :] = np.asarray(d_curvature(x), dtype=float).reshape(k, n, n, n)
            return out

    return LocalAlgebroid(
        n=n,
        m=m,
        rho_fn=lambda x: anchor,
        c_fn=c,
        d_rho_fn=lambda x: np.zeros((n, m, n)),
        d_c_fn=d_c,
        domain_hint=domain_hint,
        name=f"atiyah(R^{n} x g^{k})",
        params={"base_dim": n, "fiber_dim": k, "constants": C.tolist()},
    )


def _check_spd(mu: np.ndarray, where: str) -> None:
    if not np.allclose(mu, mu.T, atol=1e-12):
        raise MetricError(f"metric is not symmetric at {where}")
    if np.linalg.eigvalsh(mu).min() <= 0.0:
        raise MetricError(f"metric is not positive definite at {where}")


def _complement_frame(mu: np.ndarray, indices: Sequence[int]) -> np.ndarray:
    """Coordinate basis of D followed by a mu-orthogonal basis of its complement"""
    m = mu.shape[0]
    D = np.eye(m)[:, list(indices)]
    # complement = kernel of D^T mu
    _, _, vt = np.linalg.svd(D.T @ mu)
    comp = vt[len(indices):].T
    return np.hstack([D, comp])


def nonholonomic_restriction(
    alg: LocalAlgebroid,
    metric: Union[ArrayFn, Sequence, np.ndarray],
    frame: Optional[Union[ArrayFn, Sequence, np.ndarray]] = None,
    rank: Optional[int] = None,
    indices: Optional[Sequence[int]] = None,
    samples: int = 8,
    tol: float = 1e-9,
) -> LocalAlgebroid:
    """Restriction to a subbundle D with bracket P_D[.,.] (mu-orthogonal projection).

    ``frame(x)`` is an adapted frame (columns in the old basis); its first
    ``rank`` columns span D and the remaining ones must be mu-orthogonal to D.
    Alternatively ``indices`` selects a coordinate subspace and the complement
    is computed from the metric.
    """
    mu_fn = metric if callable(metric) else (lambda x, _mu=np.asarray(metric, dtype=float): _mu)

    if indices is not None:
        rank = len(indices)
        frame_fn = lambda x: _complement_frame(np.asarray(mu_fn(x), dtype=float), indices)
    elif frame is not None and rank is not None:
        frame_fn = frame if callable(frame) else (lambda x, _T=np.asarray(frame, dtype=float): _T)
    else:
        raise MetricError("nonholonomic_restriction needs either an adapted frame with rank or an index subset")

    m, n, k = alg.m, alg.n, int(rank)
    if not 0 < k <= m:
        raise MetricError(f"rank of D must lie in 1..{m}, got {k}")

    for x in alg.sample_points(samples):
        mu = np.asarray(mu_fn(x), dtype=float)
        _check_spd(mu, f"x={x}")
        T = np.asarray(frame_fn(x), dtype=float)
        if abs(np.linalg.det(T)) < 1e-12:
            raise MetricError(f"adapted frame is singular at x={x}")
        cross = T[:, :k].T @ mu @ T[:, k:]
        if cross.size and np.abs(cross).max() > tol * max(1.0, np.abs(mu).max()):
            raise MetricError(f"frame complement is not mu-orthogonal to D (max {np.abs(cross).max():.3e})")

    def T_of(x):
        return np.asarray(frame_fn(x), dtype=float).reshape(m, m)

    def rho(x):
        return alg.rho(x) @ T_of(x)[:, :k]

    def c(x):
        T = T_of(x)
        Tinv = np.linalg.inv(T)
        Td = T[:, :k]
        full = np.einsum("ijl,jp,lq->ipq", alg.c(x), Td, Td)
        if n:
            dT = central_jacobian(lambda z: T_of(z)[:, :k], x, alg.fd_step)  # [i, q, a]
            rho_d = alg.rho(x) @ Td  # [a, p]
            # rho(e'_p)(T^i_q) - rho(e'_q)(T^i_p)
            lie = np.einsum("ap,iqa->ipq", rho_d, dT)
            full = full + lie - np.swapaxes(lie, 1, 2)
        coeffs = np.einsum("ri,ipq->rpq", Tinv, full)
        return coeffs[:k]

    logger.debug("nonholonomic restriction of {} to rank {}", alg.name, k)
    return LocalAlgebroid(
        n=n,
        m=k,
        rho_fn=rho,
        c_fn=c,
        d_rho_fn=(lambda x: np.zeros((n, k, n))) if n == 0 else None,
        d_c_fn=(lambda x: np.zeros((k, k, k, n))) if n == 0 else None,
        domain_hint=alg.domain_hint,
        name=f"D({alg.name})",
        params={"parent": alg.name, "rank": k},
        fd_step=alg.fd_step,
    )


def chaplygin_metric(m: float = 1.0, J: float = 1.0, a: float = 1.0, b: float = 1.0) -> np.ndarray:
    """Kinetic-energy metric of the sleigh on se(2) in (v1, v2, omega)"""
    return np.array(
        [
            [m, 0.0, -b * m],
            [0.0, m, a * m],
            [-b * m, a * m, J + m * (a * a + b * b)],
        ]
    )


def chaplygin_frame(m: float = 1.0, J: float = 1.0, a: float = 1.0, b: float = 1.0) -> np.ndarray:
    """Adapted frame e1=E3, e2=E1, e3=-mab E1 + (J+ma^2) E2 - ma E3 (columns)"""
    e1 = [0.0, 0.0, 1.0]
    e2 = [1.0, 0.0, 0.0]
    e3 = [-m * a * b, J + m * a * a, -m * a]
    return np.array([e1, e2, e3]).T


def chaplygin_algebroid(m: float = 1.0, J: float = 1.0, a: float = 1.0, b: float = 1.0) -> LocalAlgebroid:
    """D-algebroid of the Chaplygin sleigh: C^1_12 = ma/(J+ma^2), C^2_12 = mab/(J+ma^2)"""
    D = nonholonomic_restriction(se2_algebra(), chaplygin_metric(m, J, a, b), chaplygin_frame(m, J, a, b), rank=2)
    return LocalAlgebroid(
        n=0,
        m=2,
        rho_fn=D.rho_fn,
        c_fn=D.c_fn,
        d_rho_fn=D.d_rho_fn,
        d_c_fn=D.d_c_fn,
        name="chaplygin_D",
        params={"m": m, "J": J, "a": a, "b": b},
    )


def skew_plane(bracket: float = 1.0) -> LocalAlgebroid:
    """R^2 with identity anchor and constant c^1_{12} = bracket.

    Skew but not almost-Lie for ``bracket != 0``: coordinate fields commute
    while their bracket is sent to a nonzero vector.
    """
    C = np.zeros((2, 2, 2))
    C[0, 0, 1], C[0, 1, 0] = bracket, -bracket
    eye = np.eye(2)
    return LocalAlgebroid(
        n=2,
        m=2,
        rho_fn=lambda x: eye,
        c_fn=lambda x: C,
        d_rho_fn=lambda x: np.zeros((2, 2, 2)),
        d_c_fn=lambda x: np.zeros((2, 2, 2, 2)),
        name="skew_plane",
        params={"bracket": bracket},
    )


def circle_bundle(B: float = 1.0) -> LocalAlgebroid:
    """Atiyah algebroid of a U(1) bundle over R^2 with constant curvature F_12 = B"""
    F = np.array([[[0.0, B], [-B, 0.0]]])
    alg = atiyah_trivialized(2, np.zeros((1, 1, 1)), F)
    return LocalAlgebroid(
        n=2, m=3, rho_fn=alg.rho_fn, c_fn=alg.c_fn, d_rho_fn=alg.d_rho_fn, d_c_fn=alg.d_c_fn,
        name="circle_bundle", params={"B": B},
    )


def so3_bundle_curvature(x: np.ndarray, strength: float = 1.0) -> np.ndarray:
    """so(3)-valued 2-form on R^2: F^alpha_12 = strength (sin x1, cos x2, x1 x2)"""
    g = strength * np.array([np.sin(x[0]), np.cos(x[1]), x[0] * x[1]])
    F = np.zeros((3, 2, 2))
    F[:, 0, 1], F[:, 1, 0] = g, -g
    return F


def so3_bundle_curvature_derivative(x: np.ndarray, strength: float = 1.0) -> np.ndarray:
    dg = strength * np.array([[np.cos(x[0]), 0.0], [0.0, -np.sin(x[1])], [x[1], x[0]]])
    dF = np.zeros((3, 2, 2, 2))
    dF[:, 0, 1, :], dF[:, 1, 0, :] = dg, -dg
    return dF


def so3_bundle(strength: float = 1.0) -> LocalAlgebroid:
    """Atiyah algebroid over R^2 with so(3) fiber and position-dependent curvature"""
    C = so3_algebra().c(np.zeros(0))
    alg = atiyah_trivialized(
        2, C,
        lambda x: so3_bundle_curvature(x, strength),
        lambda x: so3_bundle_curvature_derivative(x, strength),
    )
    return LocalAlgebroid(
        n=2, m=5, rho_fn=alg.rho_fn, c_fn=alg.c_fn, d_rho_fn=alg.d_rho_fn, d_c_fn=alg.d_c_fn,
        name="so3_bundle", params={"strength": strength},
    )


ALGEBROID_CONSTRUCTORS: Dict[str, Callable[..., LocalAlgebroid]] = {
    "tangent": tangent_algebroid,
    "lie_algebra": lie_algebra,
    "product": product_algebroid,
    "atiyah": atiyah_trivialized,
    "nonholonomic": nonholonomic_restriction,
}

NAMED_ALGEBROIDS: Dict[str, Callable[..., LocalAlgebroid]] = {
    "se2": se2_algebra,
    "so3": so3_algebra,
    "chaplygin": chaplygin_algebroid,
    "so3_deformed": deformed_so3_algebra,
    "skew_plane": skew_plane,
    "circle_bundle": circle_bundle,
    "so3_bundle": so3_bundle,
}


def build_algebroid(name: str, **params) -> LocalAlgebroid:
    """Look up a registered constructor or named algebroid and call it"""
    if name in ALGEBROID_CONSTRUCTORS:
        return ALGEBROID_CONSTRUCTORS[name](**params)
    if name in NAMED_ALGEBROIDS:
        return NAMED_ALGEBROIDS[name](**params)
    known = sorted(ALGEBROID_CONSTRUCTORS) + sorted(NAMED_ALGEBROIDS)
    raise KeyError(f"unknown algebroid '{name}'; known: {', '.join(known)}")


# ---------------------------------------------------------------------------
# derived geometric objects
# ---------------------------------------------------------------------------

GradFn = Callable[[np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray]]


def numerical_gradient(h: Callable[[np.ndarray, np.ndarray], float], step: float = 1e-6) -> GradFn:
    """Central-difference gradient (dh/dx, dh/dxi) of a function on E*"""

    def grad(x, xi):
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        gx = central_jacobian(lambda z: np.atleast_1d(h(z, xi)), x, step)[0] if x.size else np.zeros(0)
        gxi = central_jacobian(lambda z: np.atleast_1d(h(x, z)), xi, step)[0]
        return gx, gxi

    return grad


def hamiltonian_vector_field(
    alg: LocalAlgebroid,
    h: Optional[Callable[[np.ndarray, np.ndarray], float]],
    p: AlgebroidCovector,
    grad: Optional[GradFn] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """X_h(x, xi): xdot^a = rho^a_i dh/dxi_i,
    xidot_i = c^k_{ji} xi_k dh/dxi_j - rho^a_i dh/dx^a"""
    x, xi = alg.point(p.x), alg.fiber(p.xi)
    if grad is None:
        if h is None:
            raise ValueError("either h or its gradient must be supplied")
        grad = numerical_gradient(h, alg.fd_step)
    dh_dx, dh_dxi = grad(x, xi)
    dh_dx = np.asarray(dh_dx, dtype=float).reshape(alg.n)
    dh_dxi = np.asarray(dh_dxi, dtype=float).reshape(alg.m)

    rho, c = alg.rho(x), alg.c(x)
    x_dot = rho @ dh_dxi
    xi_dot = np.einsum("kji,k,j->i", c, xi, dh_dxi) - rho.T @ dh_dx
    return x_dot, xi_dot


def linear_poisson_bivector(alg: LocalAlgebroid, p: AlgebroidCovector) -> np.ndarray:
    """Matrix of Pi_{E*} in (x, xi) with X_h = Pi @ (dh/dx, dh/dxi)"""
    x, xi = alg.point(p.x), alg.fiber(p.xi)
    n, m = alg.n, alg.m
    rho = alg.rho(x)
    out = np.zeros((n + m, n + m))
    out[:n, n:] = rho
    out[n:, :n] = -rho.T
    out[n:, n:] = np.einsum("kji,k->ij", alg.c(x), xi)
    return out


def complete_lift(
    alg: LocalAlgebroid,
    section: ArrayFn,
    e: AlgebroidElement,
    d_section: Optional[ArrayFn] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """d_T(X)(x, y) for X = f^i(x) e_i; ``d_section(x)[k, a] = df^k/dx^a``"""
    x, y = alg.point(e.x), alg.fiber(e.y)
    f = np.asarray(section(x), dtype=float).reshape(alg.m)
    if d_section is not None:
        df = np.asarray(d_section(x), dtype=float).reshape(alg.m, alg.n)
    elif alg.n:
        df = central_jacobian(section, x, alg.fd_step)
    else:
        df = np.zeros((alg.m, 0))
    rho = alg.rho(x)
    x_dot = rho @ f
    y_dot = df @ (rho @ y) + np.einsum("kij,i,j->k", alg.c(x), y, f)
    return x_dot, y_dot


def tangent_pairing(y: np.ndarray, y_dot: np.ndarray, xi: np.ndarray, xi_dot: np.ndarray) -> float:
    """Canonical pairing of TE and TE* over the same TM point"""
    return float(np.dot(y_dot, xi) + np.dot(y, xi_dot))


def atiyah_hamiltonian_field(
    base_dim: int,
    lie_algebra_constants: np.ndarray,
    curvature: Union[ArrayFn, np.ndarray],
    grad: Callable[[np.ndarray, np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray, np.ndarray]],
    x: np.ndarray,
    p: np.ndarray,
    zeta: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Explicit Hamiltonian field on T*M x g* for the connection trivialization.

    ``grad(x, p, zeta)`` returns (dh/dx, dh/dp, dh/dzeta). The result is
    (xdot, pdot, zetadot) with
    pdot_b = zeta_alpha F^alpha_{ab} dh/dp_a - dh/dx^b and
    zetadot_beta = zeta_gamma C^gamma_{alpha beta} dh/dzeta_alpha.
    """
    C = np.asarray(lie_algebra_constants, dtype=float)
    k = C.shape[0]
    F = np.asarray(curvature(x) if callable(curvature) else curvature, dtype=float).reshape(k, base_dim, base_dim)
    h_x, h_p, h_zeta = (np.asarray(g, dtype=float) for g in grad(x, p, zeta))
    x_dot = h_p
    p_dot = np.einsum("g,gab,a->b", zeta, F, h_p) - h_x
    zeta_dot = np.einsum("g,gab,a->b", zeta, C, h_zeta)
    return x_dot, p_dot, zeta_dot
