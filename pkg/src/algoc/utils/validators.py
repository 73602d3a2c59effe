"""
Validators Utility
Sample-based checks of the algebroid axioms and of user-supplied derivatives
"""

from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from loguru import logger
from pydantic import BaseModel, Field

from ..config.settings import DEFAULTS
from ..services.algebroid import LocalAlgebroid
from .errors import AxiomError, DerivativeError
from .numerics import central_jacobian


class AxiomReport(BaseModel):
    """Outcome of one axiom check over a set of sample points"""

    check: str
    algebroid: str
    max_violation: float
    tol: float
    passed: bool
    samples: int
    seed: Optional[int] = None
    derivatives: str = "analytic"
    worst_point: List[float] = Field(default_factory=list)
    issues: List[str] = Field(default_factory=list)
    warnings: List[str] = Field(default_factory=list)

    @property
    def valid(self) -> bool:
        return self.passed


def _resolve_samples(alg: LocalAlgebroid, samples: Optional[Sequence], seed: int) -> np.ndarray:
    if samples is None:
        return alg.sample_points(DEFAULTS.axiom_samples, seed)
    if len(samples) == 0:
        raise AxiomError("axiom check needs at least one sample point")
    if alg.n == 0:
        return np.zeros((len(samples), 0))
    return np.asarray(samples, dtype=float).reshape(-1, alg.n)


def _default_tol(alg: LocalAlgebroid, uses_derivatives: bool) -> float:
    if uses_derivatives and not alg.analytic_derivatives:
        return DEFAULTS.tol_axiom_fd
    return DEFAULTS.tol_axiom_analytic


def _report(
    check: str,
    alg: LocalAlgebroid,
    residual_fn,
    samples: Optional[Sequence],
    tol: Optional[float],
    seed: int,
    uses_derivatives: bool,
) -> AxiomReport:
    points = _resolve_samples(alg, samples, seed)
    tol = _default_tol(alg, uses_derivatives) if tol is None else tol

    worst, worst_x = 0.0, points[0]
    for x in points:
        try:
            value = float(np.max(np.abs(residual_fn(x)), initial=0.0))
        except (ArithmeticError, ValueError) as exc:
            raise DerivativeError(f"{check}: evaluation failed at x={x}: {exc}") from exc
        if not np.isfinite(value):
            raise DerivativeError(f"{check}: non-finite residual at x={x}")
        if value > worst:
            worst, worst_x = value, x

    report = AxiomReport(
        check=check,
        algebroid=alg.name,
        max_violation=worst,
        tol=tol,
        passed=worst <= tol,
        samples=len(points),
        seed=seed if samples is None else None,
        derivatives="analytic" if alg.analytic_derivatives or not uses_derivatives else "fd",
        worst_point=[float(v) for v in worst_x],
    )
    if not report.passed:
        report.issues.append(f"{check} violated by {worst:.3e} (tol {tol:.1e}) at x={list(worst_x)}")
        logger.warning("{} failed for {}: {:.3e}", check, alg.name, worst)
    else:
        logger.debug("{} passed for {}: {:.3e}", check, alg.name, worst)
    return report


def skew_residual(alg: LocalAlgebroid, x) -> np.ndarray:
    """c^i_{jk} + c^i_{kj}"""
    c = alg.c(x)
    return c + np.swapaxes(c, 1, 2)


def almost_lie_residual(alg: LocalAlgebroid, x) -> np.ndarray:
    """(d_b rho^a_k) rho^b_j - (d_b rho^a_j) rho^b_k - rho^a_i c^i_{jk}, indexed [a, j, k]"""
    rho, d_rho, c = alg.rho(x), alg.d_rho(x), alg.c(x)
    lhs = np.einsum("akb,bj->ajk", d_rho, rho) - np.einsum("ajb,bk->ajk", d_rho, rho)
    return lhs - np.einsum("ai,ijk->ajk", rho, c)


def jacobiator(alg: LocalAlgebroid, x) -> np.ndarray:
    """J^i_{jkl} = sum over cyclic (j,k,l) of c^i_{jm} c^m_{kl} + rho^b_j d_b c^i_{kl}"""
    rho, c, d_c = alg.rho(x), alg.c(x), alg.d_c(x)
    term = np.einsum("ijm,mkl->ijkl", c, c) + np.einsum("bj,iklb->ijkl", rho, d_c)
    return term + np.einsum("iklj->ijkl", term) + np.einsum("iljk->ijkl", term)


def check_skew(
    alg: LocalAlgebroid,
    samples: Optional[Sequence] = None,
    tol: Optional[float] = None,
    seed: int = DEFAULTS.sample_seed,
) -> AxiomReport:
    """Skew-symmetry of the bracket coefficients in the lower indices"""
    return _report("skew", alg, lambda x: skew_residual(alg, x), samples, tol, seed, False)


def check_almost_lie(
    alg: LocalAlgebroid,
    samples: Optional[Sequence] = None,
    tol: Optional[float] = None,
    seed: int = DEFAULTS.sample_seed,
) -> AxiomReport:
    """Anchor is a bracket morphism in local form"""
    return _report("almost_lie", alg, lambda x: almost_lie_residual(alg, x), samples, tol, seed, True)


def check_jacobi(
    alg: LocalAlgebroid,
    samples: Optional[Sequence] = None,
    tol: Optional[float] = None,
    seed: int = DEFAULTS.sample_seed,
) -> AxiomReport:
    """Jacobiator of the bracket on coordinate sections"""
    return _report("jacobi", alg, lambda x: jacobiator(alg, x), samples, tol, seed, True)


def check_derivatives(
    alg: LocalAlgebroid,
    samples: Optional[Sequence] = None,
    tol: float = 1e-7,
    step: float = 1e-5,
    seed: int = DEFAULTS.sample_seed,
) -> AxiomReport:
    """Analytic d_rho, d_c against central differences with ``step``"""
    if not alg.analytic_derivatives:
        report = AxiomReport(
            check="derivatives", algebroid=alg.name, max_violation=0.0, tol=tol,
            passed=True, samples=0, derivatives="fd",
        )
        report.warnings.append("no analytic derivatives supplied; nothing to compare")
        return report

    def residual(x):
        fd_rho = central_jacobian(alg.rho, x, step)
        fd_c = central_jacobian(alg.c, x, step)
        return np.concatenate([(alg.d_rho(x) - fd_rho).ravel(), (alg.d_c(x) - fd_c).ravel()])

    return _report("derivatives", alg, residual, samples, tol, seed, False)


def validate_algebroid(
    alg: LocalAlgebroid,
    samples: Optional[Sequence] = None,
    seed: int = DEFAULTS.sample_seed,
    tol: Optional[float] = None,
) -> Dict[str, Any]:
    """Run every axiom check and collect the results in one summary"""
    reports = {
        "skew": check_skew(alg, samples, tol, seed),
        "almost_lie": check_almost_lie(alg, samples, tol, seed),
        "jacobi": check_jacobi(alg, samples, tol, seed),
    }
    summary = {
        "algebroid": alg.name,
        "reports": reports,
        "is_skew": reports["skew"].passed,
        "is_almost_lie": reports["skew"].passed and reports["almost_lie"].passed,
        "is_lie": all(r.passed for r in reports.values()),
        "issues": [issue for r in reports.values() for issue in r.issues],
    }
    return summary
