"""
Built-in Scenarios
Registry of the worked example problems with their configs and oracle checks
"""

from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Tuple

import numpy as np
from scipy.stats import qmc

from ..config.settings import DEFAULTS
from ..services.algebroid import (
    atiyah_hamiltonian_field,
    chaplygin_metric,
    hamiltonian_vector_field,
    so3_algebra,
    so3_bundle_curvature,
)
from ..utils.numerics import sup_norm
from .oracles import (
    chaplygin_eom_residual,
    chaplygin_momenta,
    euler_poincare_reference,
    lorentz_circle,
    lqr_closed_form,
    wong_residual,
)

# name -> (value, threshold); a check passes when value <= threshold
CheckValues = Dict[str, Tuple[float, float]]


@dataclass(frozen=True)
class Builtin:
    name: str
    description: str
    config_text: str
    check: Callable[[Any], CheckValues]
    needs_trajectory: bool = True


def _so3_two_axis_check(state) -> CheckValues:
    """u = sgn<xi, b> at every regular uniform-grid node"""
    traj = state.traj
    b = np.asarray(state.config.problem.params["b"], dtype=float)
    grid = np.ones(traj.t.size, bool) if traj.grid_node is None else traj.grid_node
    switching = traj.xi @ b
    regular = grid & (np.abs(switching) > DEFAULTS.singular_gap_tol)
    mismatches = int(np.sum(traj.u[regular, 0] != np.sign(switching[regular])))
    return {
        "sign_mismatches": (float(mismatches), 0.0),
        "H_abs_max": (float(np.max(np.abs(traj.H[grid]))), state.config.numerics.tol),
    }


def _chaplygin_check(state) -> CheckValues:
    traj = state.traj
    p = {k: float(state.config.algebroid.params.get(k, 1.0)) for k in ("m", "J", "a", "b")}
    eom = chaplygin_eom_residual(traj.t, traj.u, **p)
    stationarity = sup_norm(traj.xi - chaplygin_momenta(traj.u, **p))
    return {
        "eom_first": (eom["first"], state.config.numerics.tol),
        "eom_second": (eom["second"], state.config.numerics.tol),
        "stationarity": (stationarity, 1e-12),
    }


def _euler_poincare_check(state) -> CheckValues:
    traj = state.traj
    inertia = state.problem.params["inertia"]
    reference = euler_poincare_reference(inertia, traj.xi[0], traj.t)
    tol = state.config.numerics.tol
    energy = np.max(np.abs(traj.H - traj.H[0]))
    casimir = np.sum(traj.xi ** 2, axis=1)
    return {
        "reference_error": (sup_norm(traj.xi - reference), tol),
        "energy_drift": (float(energy), tol),
        "casimir_drift": (float(np.max(np.abs(casimir - casimir[0]))), tol),
    }


def _crosscheck_hamiltonian(x, xi):
    """h = |p|^2/2 + zeta.W.zeta/2 + cos(x1) x2 + (p.x) zeta3 with its gradient"""
    p, zeta = xi[:2], xi[2:]
    w = np.array([1.0, 2.0, 3.0])
    h_x = np.array([-np.sin(x[0]) * x[1], np.cos(x[0])]) + p * zeta[2]
    h_p = p + x * zeta[2]
    h_zeta = w * zeta
    h_zeta[2] += p @ x
    return h_x, h_p, h_zeta


def atiyah_crosscheck_error(alg, count: int = 1000, seed: int = DEFAULTS.sample_seed) -> float:
    """max difference between the generic and the explicit Atiyah Hamiltonian fields"""
    strength = float(alg.params.get("strength", 1.0))
    C = so3_algebra().c(np.zeros(0))
    points = qmc.scale(qmc.Halton(d=alg.n + alg.m, scramble=True, seed=seed).random(count), -2.0, 2.0)

    def grad(x, xi):
        h_x, h_p, h_zeta = _crosscheck_hamiltonian(x, xi)
        return h_x, np.concatenate([h_p, h_zeta])

    worst = 0.0
    for row in points:
        x, xi = row[: alg.n], row[alg.n :]
        x_dot, xi_dot = hamiltonian_vector_field(alg, None, alg.covector(x, xi), grad)
        ref_x, ref_p, ref_zeta = atiyah_hamiltonian_field(
            alg.n, C, lambda z: so3_bundle_curvature(z, strength),
            lambda z, p, zeta: _crosscheck_hamiltonian(z, np.concatenate([p, zeta])),
            x, xi[: alg.n], xi[alg.n :],
        )
        diff = np.concatenate([x_dot - ref_x, xi_dot - np.concatenate([ref_p, ref_zeta])])
        worst = max(worst, float(np.max(np.abs(diff))))
    return worst


def _atiyah_check(state) -> CheckValues:
    return {"field_difference": (atiyah_crosscheck_error(state.alg, seed=state.config.numerics.seed), 1e-10)}


def _lqr_check(state) -> CheckValues:
    traj = state.traj
    params = state.problem.params
    grid = np.ones(traj.t.size, bool) if traj.grid_node is None else traj.grid_node
    ref = lqr_closed_form(params["a"], params["q"], params["r"], traj.t1, traj.x[0, 0], traj.t[grid])
    tol = state.config.numerics.tol
    return {
        "state_error": (sup_norm(traj.x[grid, 0] - ref["x"]), tol),
        "costate_error": (sup_norm(traj.xi[grid, 0] - ref["xi"]), tol),
        "terminal_costate": (abs(float(traj.xi[-1, 0])), tol),
    }


def _wong_check(state) -> CheckValues:
    traj = state.traj
    B = float(state.config.algebroid.params.get("B", 1.0))
    F = np.array([[[0.0, B], [-B, 0.0]]])
    lambda0 = -traj.xi0
    report = wong_residual(traj.t, traj.x, traj.xi[:, 2], F, lambda0=lambda0, velocity=traj.u, tol=state.config.numerics.tol)
    X, _ = lorentz_circle(B, float(traj.xi[0, 2]), traj.x[0], traj.u[0], traj.t - traj.t0, lambda0)
    tol = state.config.numerics.tol
    return {
        "force_residual": (report.force_residual, tol),
        "charge_residual": (report.charge_residual, tol),
        "lorentz_error": (sup_norm(traj.x - X), tol),
    }


def _lqr_config() -> str:
    a, q, r, T, x0 = 0.5, 1.0, 1.0, 1.0, 1.0
    xi_start = lqr_closed_form(a, q, r, T, x0, np.array([0.0]))["xi"][0]
    return f"""
name = tangent_lqr_1d
algebroid.name = tangent
algebroid.n = 1
problem.name = lqr
problem.a = {a}
problem.q = {q}
problem.r = {r}
horizon.t1 = {T}
initial.x0 = {x0}
initial.xi = {xi_start:.17g}
boundary.S1 = 1
pipeline.builtin = tangent_lqr_1d
"""


def _chaplygin_config() -> str:
    metric = chaplygin_metric()
    # kinetic matrix of the D-velocities (y1, y2) = (omega, v1)
    M = metric[np.ix_([2, 0], [2, 0])]
    rows = "; ".join(", ".join(f"{v:g}" for v in row) for row in M)
    return f"""
name = chaplygin_sleigh
algebroid.name = chaplygin
algebroid.m = 1
algebroid.J = 1
algebroid.a = 1
algebroid.b = 1
problem.name = quadratic
problem.inertia = {rows}
horizon.t1 = 2
initial.xi = 0.8, 0.3
pipeline.builtin = chaplygin_sleigh
"""


_SO3_TWO_AXIS = """
name = so3_two_axis
algebroid.name = so3
problem.name = two_axis
problem.a = 0, 0, 1
problem.b = 1, 0, 0
problem.U = -1, 1
horizon.t1 = 6
horizon.mode = free
initial.xi = 0.3, 1, 0.2
cone.enabled = true
pipeline.builtin = so3_two_axis
"""

_EULER_POINCARE = """
name = euler_poincare_rigid_body
algebroid.name = so3
problem.name = quadratic
problem.inertia = 1, 0, 0; 0, 2, 0; 0, 0, 3
horizon.t1 = 5
initial.xi = 1, 0.5, -0.3
pipeline.builtin = euler_poincare_rigid_body
"""

_ATIYAH_CROSSCHECK = """
name = atiyah_hamiltonian_crosscheck
algebroid.name = so3_bundle
algebroid.strength = 1
pipeline.stages = axioms, checks
pipeline.builtin = atiyah_hamiltonian_crosscheck
"""

_WONG = """
name = wong_residual_circle_bundle
algebroid.name = circle_bundle
algebroid.B = 1
problem.name = quadratic
problem.active = 0, 1
horizon.t1 = 6
initial.x0 = 0, 0
initial.xi = 1, 0, 0.8
pipeline.builtin = wong_residual_circle_bundle
"""

BUILTINS: Dict[str, Builtin] = {
    b.name: b
    for b in (
        Builtin("so3_two_axis", "time-optimal bang-bang steering on so(3) with two control axes",
                _SO3_TWO_AXIS, _so3_two_axis_check),
        Builtin("chaplygin_sleigh", "quadratic-cost extremal on the Chaplygin D-algebroid against its equations of motion",
                _chaplygin_config(), _chaplygin_check),
        Builtin("euler_poincare_rigid_body", "unconstrained rigid-body extremal against an independent Euler-Poincare solve",
                _EULER_POINCARE, _euler_poincare_check),
        Builtin("atiyah_hamiltonian_crosscheck", "generic versus explicit Hamiltonian field on an so(3) Atiyah algebroid",
                _ATIYAH_CROSSCHECK, _atiyah_check, needs_trajectory=False),
        Builtin("tangent_lqr_1d", "scalar linear-quadratic problem against the Riccati closed form",
                _lqr_config(), _lqr_check),
        Builtin("wong_residual_circle_bundle", "charged particle on a constant-curvature circle bundle against the Lorentz circle",
                _WONG, _wong_check),
    )
}


def list_builtins() -> List[Tuple[str, str]]:
    """(name, description) for every registered scenario"""
    return [(b.name, b.description) for b in BUILTINS.values()]


def get_builtin(name: str) -> Builtin:
    if name not in BUILTINS:
        raise KeyError(f"unknown builtin '{name}'; known: {', '.join(BUILTINS)}")
    return BUILTINS[name]
