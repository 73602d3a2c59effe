"""
Reference Oracles
Closed forms and independent integrations the built-in scenarios are checked against
"""

from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from ..config.settings import DEFAULTS
from ..utils.numerics import grid_derivative, segmented_derivative, sup_norm


class WongReport(BaseModel):
    """Residuals of the Wong equations along a sampled path"""

    force_residual: float
    charge_residual: float
    tol: float
    passed: bool
    issues: List[str] = Field(default_factory=list)

    @property
    def max_residual(self) -> float:
        return max(self.force_residual, self.charge_residual)


def wong_residual(
    t: np.ndarray,
    X: np.ndarray,
    zeta: np.ndarray,
    curvature: Union[np.ndarray, callable],
    lambda0: float = 1.0,
    metric: Optional[np.ndarray] = None,
    velocity: Optional[np.ndarray] = None,
    segment: Optional[np.ndarray] = None,
    tol: float = DEFAULTS.pmp_tol,
) -> WongReport:
    """lambda0 Xddot = <zeta, F(Xdot, .)>^# and zetadot = 0 for an abelian structure group.

    The base metric is constant (flat by default), so the Levi-Civita
    derivative is the ordinary one. ``curvature`` is ``F[alpha, a, b]`` or a
    callable of the base point.
    """
    t = np.asarray(t, dtype=float)
    X = np.asarray(X, dtype=float)
    zeta = np.asarray(zeta, dtype=float).reshape(t.size, -1)
    segment = np.zeros(t.size, dtype=int) if segment is None else np.asarray(segment)
    n = X.shape[1]
    mu_inv = np.eye(n) if metric is None else np.linalg.inv(np.asarray(metric, dtype=float))

    V = segmented_derivative(t, X, segment, order=4) if velocity is None else np.asarray(velocity, dtype=float)
    acc = segmented_derivative(t, V, segment, order=4)
    force = np.empty_like(V)
    for k in range(t.size):
        F = curvature(X[k]) if callable(curvature) else curvature
        F = np.asarray(F, dtype=float).reshape(-1, n, n)
        force[k] = mu_inv @ np.einsum("g,gab,a->b", zeta[k], F, V[k])
    force_res = sup_norm(lambda0 * acc - force)
    charge_res = sup_norm(segmented_derivative(t, zeta, segment, order=4))

    report = WongReport(
        force_residual=force_res,
        charge_residual=charge_res,
        tol=tol,
        passed=max(force_res, charge_res) <= tol,
    )
    if force_res > tol:
        report.issues.append(f"force equation residual {force_res:.3e}")
    if charge_res > tol:
        report.issues.append(f"charge is not conserved ({charge_res:.3e})")
    return report


def lorentz_circle(
    B: float, zeta: float, x0: Sequence[float], v0: Sequence[float], t: np.ndarray, lambda0: float = 1.0
) -> Tuple[np.ndarray, np.ndarray]:
    """Planar charged particle: lambda0 Xddot = zeta B J Xdot, J the quarter turn.

    Returns positions and velocities; the velocity rotates at omega = zeta B / lambda0.
    """
    t = np.asarray(t, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    omega = zeta * B / lambda0
    c, s = np.cos(omega * t), np.sin(omega * t)
    V = np.stack([c * v0[0] - s * v0[1], s * v0[0] + c * v0[1]], axis=1)
    if omega == 0.0:
        return x0 + np.outer(t, v0), V
    X = np.stack(
        [x0[0] + (s * v0[0] - (1.0 - c) * v0[1]) / omega, x0[1] + ((1.0 - c) * v0[0] + s * v0[1]) / omega],
        axis=1,
    )
    return X, V


def chaplygin_momenta(y: np.ndarray, m: float = 1.0, J: float = 1.0, a: float = 1.0, b: float = 1.0) -> np.ndarray:
    """Stationarity of H in y: xi1 = (J + m(a^2 + b^2)) y1 - b m y2, xi2 = m y2 - b m y1"""
    y = np.atleast_2d(np.asarray(y, dtype=float))
    xi1 = (J + m * (a * a + b * b)) * y[:, 0] - b * m * y[:, 1]
    xi2 = m * y[:, 1] - b * m * y[:, 0]
    return np.stack([xi1, xi2], axis=1)


def chaplygin_eom_residual(
    t: np.ndarray,
    y: np.ndarray,
    m: float = 1.0,
    J: float = 1.0,
    a: float = 1.0,
    b: float = 1.0,
) -> Dict[str, float]:
    """(J + m(a^2+b^2)) y1dot - b m y2dot = -m a y1 y2 and m y2dot - b m y1dot = m a y1^2"""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    yd = grid_derivative(t, y, order=4)
    first = (J + m * (a * a + b * b)) * yd[:, 0] - b * m * yd[:, 1] + m * a * y[:, 0] * y[:, 1]
    second = m * yd[:, 1] - b * m * yd[:, 0] - m * a * y[:, 0] ** 2
    return {"first": sup_norm(first), "second": sup_norm(second)}


def lqr_closed_form(
    a: float, q: float, r: float, T: float, x0: float, t: np.ndarray
) -> Dict[str, np.ndarray]:
    """Free-endpoint scalar LQ problem: Riccati gain, state and costate.

    P(t) = P+ P- (1 - E) / (P- - P+ E) with E = exp(-2 beta (T - t)),
    P+- = r (a +- beta), beta = sqrt(a^2 + q / r); xi = -P x.
    """
    t = np.asarray(t, dtype=float)
    beta = np.sqrt(a * a + q / r)
    p_plus, p_minus = r * (a + beta), r * (a - beta)

    def gain(s):
        E = np.exp(-2.0 * beta * (T - s))
        return p_plus * p_minus * (1.0 - E) / (p_minus - p_plus * E)

    K = np.array([[a, 1.0 / r], [q, -a]])
    z0 = np.array([x0, -gain(0.0) * x0])
    Z = np.array([expm(K * s) @ z0 for s in t])
    return {"t": t, "P": gain(t), "x": Z[:, 0], "xi": Z[:, 1], "u": Z[:, 1] / r}


def euler_poincare_reference(inertia: Sequence, p0: Sequence[float], t: np.ndarray) -> np.ndarray:
    """Momenta of d/dt p = p x I^-1 p (rigid body) by a tight DOP853 solve"""
    inertia = np.atleast_2d(np.asarray(inertia, dtype=float))
    if inertia.shape == (1, 3):
        inertia = np.diag(inertia[0])
    t = np.asarray(t, dtype=float)
    t_eval, first = np.unique(t, return_index=True)

    def rhs(_s, p):
        return np.cross(p, np.linalg.solve(inertia, p))

    sol = solve_ivp(rhs, (t_eval[0], t_eval[-1]), np.asarray(p0, dtype=float), method="DOP853",
                    t_eval=t_eval, rtol=1e-12, atol=1e-13)
    out = np.empty((t.size, 3))
    out[:] = sol.y.T[np.searchsorted(t_eval, t)]
    return out
