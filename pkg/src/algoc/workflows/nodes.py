"""
Pipeline Nodes
One function per scenario stage; each reads and extends the ScenarioState
"""

from pathlib import Path
from typing import Callable, Dict

import numpy as np
from loguru import logger

from ..components.builtins import BUILTINS
from ..components.problems import build_problem
from ..services.algebroid import build_algebroid
from ..services.dynamics import PiecewiseControl, integrate_base, path_to_frame
from ..services.needle import cone_to_frame
from ..services.pmp import (
    casimir_drift,
    hamiltonian_drift,
    pmp_residual_report,
    solve_extremal,
    transversality_check,
)
from ..services.problem import check_control_in
from ..services.separation import pmp_certificate
from ..services.transport import (
    costate_trajectory_frame,
    costate_transport,
    pairing_drift,
    parallel_transport,
)
from ..utils.errors import ConfigError
from ..utils.file_utils import write_csv, write_json
from ..utils.validators import validate_algebroid
from .state import ScenarioReport, ScenarioState


def setup_models(state: ScenarioState) -> None:
    """Build the algebroid and, when configured, the control problem"""
    cfg = state.config
    try:
        state.alg = build_algebroid(cfg.algebroid.name, **cfg.algebroid.params)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"algebroid '{cfg.algebroid.name}': {exc}") from exc
    if cfg.problem is not None:
        state.problem = build_problem(cfg.problem.name, state.alg, **cfg.problem.params)


def _require_problem(state: ScenarioState, stage: str) -> None:
    if state.problem is None:
        raise ConfigError(f"stage '{stage}' needs a problem section")


def _x0(state: ScenarioState) -> np.ndarray:
    return state.alg.point(state.config.initial.x0)


def _is_hook(state: ScenarioState) -> bool:
    return state.problem.U.kind == "hook"


def run_axioms(state: ScenarioState) -> None:
    num = state.config.numerics
    samples = state.alg.sample_points(num.samples, num.seed)
    summary = validate_algebroid(state.alg, samples=samples, seed=num.seed, tol=num.tol_axiom)
    reports = summary["reports"]
    state.record("axioms", "skew", reports["skew"].max_violation, reports["skew"].tol)
    state.record("axioms", "almost_lie", reports["almost_lie"].max_violation, reports["almost_lie"].tol)
    if num.require_jacobi:
        state.record("axioms", "jacobi", reports["jacobi"].max_violation, reports["jacobi"].tol)
    state.details["axioms"] = {name: r.model_dump() for name, r in reports.items()}
    state.details["axioms"]["is_lie"] = summary["is_lie"]


def run_extremal(state: ScenarioState) -> None:
    cfg = state.config
    _require_problem(state, "extremal")
    if cfg.control.given:
        logger.info("extremal: reference control given, synthesis skipped")
        return
    if cfg.initial.xi is None:
        raise ConfigError("stage 'extremal' needs initial.xi")
    control, traj = solve_extremal(
        state.problem,
        _x0(state),
        cfg.initial.xi,
        xi0=cfg.initial.xi0,
        t0=cfg.horizon.t0,
        t1=cfg.horizon.t1,
        mode=cfg.horizon.mode,
        steps=cfg.numerics.steps,
    )
    state.control, state.traj = control, traj
    state.frames["extremal"] = costate_trajectory_frame(traj)
    state.details["extremal"] = {
        "switch_times": list(traj.switch_times),
        "nodes": int(traj.t.size),
        "xi_start": traj.xi[0].tolist(),
        "xi0": traj.xi0,
        "hamiltonian_drift": hamiltonian_drift(traj),
        "casimir_drift": casimir_drift(traj),
    }


def run_simulate(state: ScenarioState) -> None:
    cfg = state.config
    _require_problem(state, "simulate")
    if cfg.control.given:
        values = np.asarray(cfg.control.values, dtype=float)
        check_control_in(state.problem, values)
        state.control = PiecewiseControl(np.asarray(cfg.control.breakpoints, dtype=float), values)
    if state.control is None:
        raise ConfigError("stage 'simulate' needs control.breakpoints/values or an extremal")

    if state.traj is not None and _is_hook(state) and not cfg.control.given:
        # one control cell per grid step: the extremal nodes already are the path
        state.path = state.traj.path()
    else:
        state.path = integrate_base(state.problem, state.control, _x0(state), cfg.numerics.steps_per_segment)
    state.frames["path"] = path_to_frame(state.path)
    state.details["simulate"] = {
        "segments": state.control.n_segments,
        "x_final": state.path.x_final.tolist(),
        "cost": None if state.path.cost is None else float(state.path.cost[-1]),
    }


def _residual_control(state: ScenarioState):
    return None if _is_hook(state) else state.control


def run_residuals(state: ScenarioState) -> None:
    cfg = state.config
    _require_problem(state, "residuals")
    if state.traj is None:
        if cfg.initial.xi is None or state.path is None:
            raise ConfigError("stage 'residuals' needs an extremal or initial.xi with a reference control")
        state.traj = costate_transport(state.problem, state.control, state.path, cfg.initial.xi, cfg.initial.xi0)
        state.frames["extremal"] = costate_trajectory_frame(state.traj)

    tol = cfg.numerics.tol
    h_zero = cfg.horizon.mode == "free"
    report = pmp_residual_report(state.problem, _residual_control(state), state.traj, tol=tol, h_zero=h_zero)
    state.record("residuals", "max_condition", report.max_condition_violation, tol)
    state.record("residuals", "adjoint_residual", report.adjoint_residual, tol)
    if h_zero:
        state.record("residuals", "H_zero", report.H_zero_violation, tol)
    state.record("residuals", "covector_vanishes", 0.0 if report.nonvanishing_ok else 1.0, 0.0)
    state.details["pmp"] = report.model_dump()
    state.warnings.extend(report.warnings)

    if cfg.boundary.S0 or cfg.boundary.S1:
        trans = transversality_check(
            state.problem, state.traj, cfg.boundary.S0, cfg.boundary.S1, extended=cfg.boundary.extended, tol=tol
        )
        state.record("residuals", "transversality", max(trans.start_violation, trans.end_violation), tol)
        state.details["transversality"] = trans.model_dump()


def run_transport(state: ScenarioState) -> None:
    cfg = state.config
    _require_problem(state, "transport")
    if state.path is None:
        raise ConfigError("stage 'transport' needs a simulated path")
    m = state.problem.m
    b = np.ones(m + 1) if cfg.initial.b is None else np.asarray(cfg.initial.b, dtype=float)
    if state.traj is not None:
        xi, xi0 = state.traj.xi[0], state.traj.xi0
    elif cfg.initial.xi is not None:
        xi, xi0 = np.asarray(cfg.initial.xi, dtype=float), cfg.initial.xi0
    else:
        xi, xi0 = np.ones(m), cfg.initial.xi0

    drift = pairing_drift(state.problem, state.control, state.path, b, xi, xi0)
    state.record("transport", "pairing_drift", drift, cfg.numerics.pairing_tol)

    fiber = parallel_transport(state.problem, state.control, state.path, b)
    frame = path_to_frame(state.path)[["t"] + [f"x_{i + 1}" for i in range(state.problem.n)]].copy()
    for i in range(fiber.b.shape[1]):
        frame[f"b_{i + 1}"] = fiber.b[:, i]
    state.frames["transport"] = frame
    state.details["transport"] = {"b_start": b.tolist(), "b_final": fiber.b_final.tolist(), "pairing_drift": drift}


def run_cone(state: ScenarioState) -> None:
    cfg = state.config
    _require_problem(state, "cone")
    if not (cfg.cone.enabled or state.explicit_stages):
        logger.info("cone: disabled in the config, skipped")
        return
    if state.path is None:
        raise ConfigError("stage 'cone' needs a simulated path")

    cert = pmp_certificate(
        state.problem,
        state.control,
        state.path,
        tau=cfg.cone.tau,
        S0=cfg.boundary.S0 or None,
        h_zero=cfg.horizon.mode == "free",
        feas_tol=cfg.numerics.feas_tol,
        tol=cfg.numerics.tol,
    )
    state.certificate = cert
    sep = cert.separation
    state.record("cone", "separable", 0.0 if sep.separable else 1.0, 0.0)
    if sep.separable:
        state.record("cone", "worst_margin", -min(sep.margins, default=0.0), cfg.numerics.feas_tol)
        state.record("cone", "certificate_issues", float(len(cert.report.issues)), 0.0)

    frame = cone_to_frame(cert.cone)
    frame["margin"] = sep.margins
    state.frames["cone"] = frame
    state.details["separation"] = sep.model_dump()
    state.details["separation"]["tau"] = cert.tau
    if cert.phi is not None:
        state.details["separation"]["covector"] = cert.phi.tolist()
        state.details["separation"]["pmp"] = cert.report.model_dump()
    if cert.counterexamples:
        state.details["separation"]["violating"] = cert.counterexamples[:10]


def run_checks(state: ScenarioState) -> None:
    name = state.config.pipeline.builtin
    if name is None:
        return
    builtin = BUILTINS[name]
    if builtin.needs_trajectory and state.traj is None:
        raise ConfigError(f"builtin check '{name}' needs the extremal stage")
    for check, (value, threshold) in builtin.check(state).items():
        state.record("checks", check, value, threshold)


STAGES: Dict[str, Callable[[ScenarioState], None]] = {
    "axioms": run_axioms,
    "extremal": run_extremal,
    "simulate": run_simulate,
    "residuals": run_residuals,
    "transport": run_transport,
    "cone": run_cone,
    "checks": run_checks,
}


def build_report(state: ScenarioState) -> ScenarioReport:
    cfg = state.config
    return ScenarioReport(
        name=cfg.name,
        algebroid=state.alg.name if state.alg is not None else cfg.algebroid.name,
        problem=None if state.problem is None else state.problem.name,
        stages=list(state.stages_run),
        checks=list(state.checks),
        details=state.details,
        seed=cfg.numerics.seed,
        warnings=list(state.warnings),
        passed=state.passed,
    )


def write_artifacts(state: ScenarioState, out_dir: Path) -> ScenarioReport:
    """CSV per produced table plus report.json, filtered by outputs.reports"""
    wanted = set(state.config.outputs.reports)
    report = build_report(state)
    for key, frame in state.frames.items():
        if key in wanted:
            report.artifacts[key] = str(write_csv(frame, out_dir / f"{key}.csv"))
    if "report" in wanted:
        report_path = out_dir / "report.json"
        report.artifacts["report"] = str(report_path)
        write_json(report, report_path)
    return report
