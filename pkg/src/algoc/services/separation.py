"""
Separation Service
Linear-programming separation of a variation cone from the cost ray
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence, Union

import numpy as np
from loguru import logger
from pydantic import BaseModel, Field
from scipy.optimize import linprog

from ..config.settings import DEFAULTS
from ..utils.errors import SeparationError
from .dynamics import PiecewiseControl, SampledPath
from .needle import VariationCone, augment_cone, build_cone
from .pmp import PMPReport, pmp_residual_report
from .problem import ControlProblem
from .transport import CostateTrajectory, TransportFlow, costate_transport


class SeparationResult(BaseModel):
    """Outcome of the cone/ray separation LP.

    ``margins[k] = -<g_k, phi>/|g_k|`` is non-negative for every generator
    the certificate separates; ``ray_margin = <lambda, phi>/|lambda|``.
    """

    separable: bool
    phi: Optional[List[float]] = None
    margin: float
    margins: List[float] = Field(default_factory=list)
    ray_margin: float = 0.0
    degenerate: bool = False
    counterexamples: List[int] = Field(default_factory=list)
    lp_solves: int = 0
    feas_tol: float = DEFAULTS.feas_tol
    warnings: List[str] = Field(default_factory=list)

    @property
    def valid(self) -> bool:
        return self.separable


def _unit_rows(vectors: np.ndarray) -> np.ndarray:
    if vectors.size == 0:
        return vectors
    norms = np.linalg.norm(vectors, axis=1)
    keep = norms > 1e-14
    return vectors[keep] / norms[keep, None]


def separate_cone_ray(
    cone: Union[VariationCone, Sequence],
    ray_dir: Sequence[float],
    extra_subspace: Optional[Sequence] = None,
    feas_tol: float = DEFAULTS.feas_tol,
) -> SeparationResult:
    """Find phi != 0 with <g, phi> <= 0 on the cone, <lambda, phi> >= 0 and phi = 0 on the subspace.

    For every coordinate i and sign one LP fixes phi_i = +-1 inside the unit
    cube and maximizes a margin s subject to <g, phi>/|g| + s <= 0 for every
    generator, -<lambda, phi>/|lambda| + s <= 0 and +-<v, phi>/|v| + s <= 0 on
    the subspace. A line (+-g pair) caps s at 0 and forces <g, phi> = 0. The
    best LP decides: separable iff its margin is >= -feas_tol.
    """
    G = cone.generators if isinstance(cone, VariationCone) else np.atleast_2d(np.asarray(cone, dtype=float))
    lam = np.asarray(ray_dir, dtype=float).reshape(-1)
    dim = lam.size
    if G.size == 0:
        G = np.zeros((0, dim))
    V = np.zeros((0, dim)) if extra_subspace is None or len(extra_subspace) == 0 else np.atleast_2d(np.asarray(extra_subspace, dtype=float))

    G_hat = _unit_rows(G)
    V_hat = _unit_rows(V)
    lam_norm = float(np.linalg.norm(lam))
    if lam_norm == 0.0:
        raise SeparationError("ray direction must be nonzero")
    lam_hat = lam / lam_norm

    if G_hat.shape[0] == 0 and V_hat.shape[0] == 0:
        phi = lam / np.max(np.abs(lam))
        logger.warning("separation: every generator vanishes; returning the ray direction")
        return SeparationResult(
            separable=True,
            phi=phi.tolist(),
            margin=0.0,
            margins=[0.0] * G.shape[0],
            ray_margin=float(lam_hat @ phi),
            degenerate=True,
            feas_tol=feas_tol,
            warnings=["all generators vanish; any phi with <lambda, phi> >= 0 separates"],
        )

    rows = np.vstack([G_hat, -lam_hat[None, :], V_hat, -V_hat])
    A_ub = np.hstack([rows, np.ones((rows.shape[0], 1))])
    b_ub = np.zeros(rows.shape[0])
    c = np.zeros(dim + 1)
    c[-1] = -1.0

    best_s, best_phi, solves = -np.inf, None, 0
    for i in range(dim):
        for sign in (1.0, -1.0):
            bounds = [(-1.0, 1.0)] * dim + [(None, 1.0)]
            bounds[i] = (sign, sign)
            res = linprog(
                c, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs-ds",
                options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
            )
            solves += 1
            if res.status != 0:
                logger.debug("separation LP (coordinate {}, sign {}) status {}: {}", i, sign, res.status, res.message)
                continue
            s = float(-res.fun)
            if s > best_s + 1e-15:
                best_s, best_phi = s, np.asarray(res.x[:dim])
    if best_phi is None:
        raise SeparationError("every separation LP failed")

    raw = G @ best_phi
    norms = np.linalg.norm(G, axis=1)
    margins = np.where(norms > 1e-14, -raw / np.where(norms > 1e-14, norms, 1.0), 0.0)
    ray_margin = float(lam_hat @ best_phi)
    sub_violation = float(np.max(np.abs(V_hat @ best_phi), initial=0.0))
    certificate_ok = (
        float(np.min(margins, initial=np.inf)) >= -feas_tol and ray_margin >= -feas_tol and sub_violation <= feas_tol
    )
    separable = best_s >= -feas_tol and certificate_ok

    result = SeparationResult(
        separable=separable,
        phi=best_phi.tolist(),
        margin=best_s,
        margins=margins.tolist(),
        ray_margin=ray_margin,
        lp_solves=solves,
        feas_tol=feas_tol,
    )
    if not separable:
        order = np.argsort(margins)
        result.counterexamples = [int(k) for k in order if margins[k] < -feas_tol]
        if ray_margin < -feas_tol:
            result.warnings.append(f"ray violated by {ray_margin:.3e}")
        if best_s >= -feas_tol and not certificate_ok:
            result.warnings.append("LP margin met but the certificate re-check failed")
        logger.debug("not separable: best margin {:.3e}, {} violating generators", best_s, len(result.counterexamples))
    return result


@dataclass
class PMPCertificate:
    """Separation outcome at t1 and, when separable, the back-transported costate"""

    separation: SeparationResult
    cone: VariationCone
    tau: float
    phi: Optional[np.ndarray] = None
    costate: Optional[CostateTrajectory] = None
    report: Optional[PMPReport] = None
    counterexamples: Optional[List[dict]] = None

    @property
    def passed(self) -> bool:
        return self.separation.separable and self.report is not None and self.report.passed


def normalize_covector(phi: np.ndarray, feas_tol: float = DEFAULTS.feas_tol) -> np.ndarray:
    """Scale (xi, xi0) so that xi0 is -1, or set it to 0 for abnormal covectors"""
    phi = np.asarray(phi, dtype=float).copy()
    if phi[-1] < -feas_tol:
        return phi / -phi[-1]
    phi[-1] = 0.0
    scale = np.max(np.abs(phi[:-1]), initial=0.0)
    return phi / scale if scale > 0 else phi


def pmp_certificate(
    problem: ControlProblem,
    u: PiecewiseControl,
    path: SampledPath,
    tau: Optional[float] = None,
    probe_controls: Optional[Sequence] = None,
    probe_times: Optional[Sequence[float]] = None,
    S0: Optional[Sequence] = None,
    h_zero: bool = False,
    feas_tol: float = DEFAULTS.feas_tol,
    tol: float = DEFAULTS.pmp_tol,
) -> PMPCertificate:
    """Separate the variation cone at t1 from the ray (0, ..., 0, -1).

    ``tau`` defaults to the midpoint of the last grid cell. When separable,
    the certificate is normalized, carried back along the path and checked
    against the maximum principle.
    """
    if tau is None:
        tau = 0.5 * (path.t[-2] + path.t[-1])
    flow = TransportFlow(problem, u, path)
    cone = build_cone(problem, u, path, tau, probe_controls, probe_times, flow)
    if S0 is not None and len(S0):
        cone = augment_cone(cone, flow.transport_basis(S0))

    ray = np.zeros(problem.m + 1)
    ray[-1] = -1.0
    separation = separate_cone_ray(cone, ray, feas_tol=feas_tol)
    certificate = PMPCertificate(separation=separation, cone=cone, tau=float(tau))
    if not separation.separable:
        certificate.counterexamples = [cone.provenance[k] for k in separation.counterexamples]
        logger.warning(
            "{}: cone not separable from the cost ray ({} violating generators)",
            problem.name, len(separation.counterexamples),
        )
        return certificate

    phi = normalize_covector(np.asarray(separation.phi), feas_tol)
    costate = costate_transport(problem, u, path, phi[:-1], xi0=float(phi[-1]), at="end")
    certificate.phi = phi
    certificate.costate = costate
    certificate.report = pmp_residual_report(problem, u, costate, tol=tol, h_zero=h_zero)
    return certificate
