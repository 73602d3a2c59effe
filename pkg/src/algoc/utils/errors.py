"""
Error Types
Exception hierarchy shared by the numerical services and the CLI
"""

from typing import Optional


class AlgocError(Exception):
    """Base class for every error raised by algoc"""

    exit_code = 3


class DimensionError(AlgocError, ValueError):
    """Array shapes do not match the owning algebroid"""

    exit_code = 2


class AxiomError(AlgocError):
    """An axiom check could not be evaluated"""


class DerivativeError(AlgocError):
    """A structure-function derivative could not be evaluated"""


class DivergenceError(AlgocError):
    """Integration left the overflow guard"""

    def __init__(self, message: str, last_time: float):
        super().__init__(f"{message} (last valid time {last_time:.6g})")
        self.last_time = last_time


class JoinMismatchError(AlgocError):
    """Two paths or sheets do not share the junction point"""

    def __init__(self, message: str, gap: float):
        super().__init__(f"{message} (gap {gap:.3e})")
        self.gap = gap


class AdmissibilityError(AlgocError):
    """A path handed in as admissible violates rho(a) = dx/dt"""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class ReparametrizationError(AlgocError, ValueError):
    """Time change is not a C^1 monotone bijection onto the path interval"""

    exit_code = 2


class ControlDomainError(AlgocError, ValueError):
    """Empty or malformed control set, or a control outside of it"""

    exit_code = 2


class NeedleError(AlgocError, ValueError):
    """Needle symbol incompatible with the reference control"""

    exit_code = 2


class ChatteringError(AlgocError):
    """Too many switches were detected inside one control segment"""


class SingularArcError(AlgocError):
    """The Hamiltonian argmax stayed degenerate over a whole step"""

    def __init__(self, message: str, t_start: float):
        super().__init__(f"{message} (from t={t_start:.6g})")
        self.t_start = t_start


class MetricError(AlgocError, ValueError):
    """Metric not SPD, or adapted frame not orthogonal to the distribution"""

    exit_code = 2


class SeparationError(AlgocError):
    """The separation linear program could not be solved"""


class ConfigError(AlgocError):
    """Scenario configuration could not be parsed or validated"""

    exit_code = 2


class PipelineError(AlgocError):
    """A scenario stage failed; wraps the original error"""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 3)


def exit_code_for(error: Optional[BaseException]) -> int:
    """Map an exception onto the CLI exit-code contract"""
    if error is None:
        return 0
    return int(getattr(error, "exit_code", 3))
