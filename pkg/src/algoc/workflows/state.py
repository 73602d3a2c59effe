"""
Scenario State
Scenario configuration model, its text format, and the state shared by the pipeline stages
"""

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

import pandas as pd
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from ..components.builtins import BUILTINS
from ..components.problems import PROBLEM_BUILDERS
from ..config.settings import DEFAULTS
from ..services.algebroid import ALGEBROID_CONSTRUCTORS, NAMED_ALGEBROIDS
from ..utils.errors import ConfigError

STAGE_ORDER = ["axioms", "extremal", "simulate", "residuals", "transport", "cone", "checks"]

_INT = re.compile(r"^[+-]?\d+$")


def _as_list(value: Any) -> Any:
    if value is None or value == "":
        return []
    return value if isinstance(value, list) else [value]


def _as_vector_rows(value: Any) -> Any:
    """A flat list is one vector; a list of lists is many"""
    value = _as_list(value)
    if value and not isinstance(value[0], list):
        return [value]
    return value


def _as_value_rows(value: Any) -> Any:
    """A flat list is one scalar control value per entry"""
    value = _as_list(value)
    return [v if isinstance(v, list) else [v] for v in value]


class AlgebroidSection(BaseModel):
    name: str
    params: Dict[str, Any] = Field(default_factory=dict)


class ProblemSection(BaseModel):
    name: str
    params: Dict[str, Any] = Field(default_factory=dict)


class HorizonSection(BaseModel):
    t0: float = 0.0
    t1: float = 1.0
    mode: Literal["fixed", "free"] = "fixed"

    @model_validator(mode="after")
    def _ordered(self):
        if not self.t1 > self.t0:
            raise ValueError(f"horizon [{self.t0}, {self.t1}] is empty")
        return self


class InitialSection(BaseModel):
    x0: List[float] = Field(default_factory=list)
    xi: Optional[List[float]] = None
    xi0: float = -1.0
    b: Optional[List[float]] = None

    listify = field_validator("x0", mode="before")(_as_list)

    @field_validator("xi", "b", mode="before")
    @classmethod
    def _optional_list(cls, value):
        return None if value is None else _as_list(value)

    @field_validator("xi0")
    @classmethod
    def _normalized_multiplier(cls, value):
        if value not in (0.0, -1.0):
            raise ValueError("xi0 must be 0 (abnormal) or -1 (normal)")
        return float(value)


class NumericsSection(BaseModel):
    steps: int = Field(DEFAULTS.extremal_steps, ge=1)
    steps_per_segment: int = Field(DEFAULTS.steps_per_segment, ge=1)
    tol: float = Field(DEFAULTS.pmp_tol, gt=0)
    tol_axiom: Optional[float] = None
    pairing_tol: float = Field(1e-8, gt=0)
    feas_tol: float = Field(DEFAULTS.feas_tol, gt=0)
    samples: int = Field(DEFAULTS.axiom_samples, ge=1)
    seed: int = DEFAULTS.sample_seed
    require_jacobi: bool = False


class OutputsSection(BaseModel):
    dir: Optional[str] = None
    reports: List[str] = Field(default_factory=lambda: ["path", "extremal", "transport", "cone", "report"])

    listify = field_validator("reports", mode="before")(_as_list)


class ControlSection(BaseModel):
    """Reference control: breakpoints s_0 < ... < s_N and one value row per segment"""

    breakpoints: List[float] = Field(default_factory=list)
    values: List[List[float]] = Field(default_factory=list)

    listify_breaks = field_validator("breakpoints", mode="before")(_as_list)
    listify_values = field_validator("values", mode="before")(_as_value_rows)

    @property
    def given(self) -> bool:
        return bool(self.breakpoints)


class ConeSection(BaseModel):
    enabled: bool = False
    tau: Optional[float] = None


class BoundarySection(BaseModel):
    S0: List[List[float]] = Field(default_factory=list)
    S1: List[List[float]] = Field(default_factory=list)
    extended: bool = False

    listify_rows = field_validator("S0", "S1", mode="before")(_as_vector_rows)


class PipelineSection(BaseModel):
    stages: List[str] = Field(default_factory=lambda: list(STAGE_ORDER))
    builtin: Optional[str] = None

    listify = field_validator("stages", mode="before")(_as_list)

    @field_validator("stages")
    @classmethod
    def _known_stages(cls, stages):
        unknown = [s for s in stages if s not in STAGE_ORDER]
        if unknown:
            raise ValueError(f"unknown stages {unknown}; known: {STAGE_ORDER}")
        return [s for s in STAGE_ORDER if s in stages]


class ScenarioConfig(BaseModel):
    """Declarative scenario: which algebroid, problem, horizon, start and numerics"""

    name: str = "scenario"
    algebroid: AlgebroidSection
    problem: Optional[ProblemSection] = None
    horizon: HorizonSection = Field(default_factory=HorizonSection)
    initial: InitialSection = Field(default_factory=InitialSection)
    numerics: NumericsSection = Field(default_factory=NumericsSection)
    outputs: OutputsSection = Field(default_factory=OutputsSection)
    control: ControlSection = Field(default_factory=ControlSection)
    cone: ConeSection = Field(default_factory=ConeSection)
    boundary: BoundarySection = Field(default_factory=BoundarySection)
    pipeline: PipelineSection = Field(default_factory=PipelineSection)

    @model_validator(mode="after")
    def _references_exist(self):
        name = self.algebroid.name
        if name not in ALGEBROID_CONSTRUCTORS and name not in NAMED_ALGEBROIDS:
            raise ValueError(f"unknown algebroid '{name}'")
        if self.problem is not None and self.problem.name not in PROBLEM_BUILDERS:
            raise ValueError(f"unknown problem '{self.problem.name}'")
        if self.pipeline.builtin is not None and self.pipeline.builtin not in BUILTINS:
            raise ValueError(f"unknown builtin check '{self.pipeline.builtin}'")
        if self.control.given and len(self.control.values) != len(self.control.breakpoints) - 1:
            raise ValueError(
                f"control has {len(self.control.breakpoints)} breakpoints and {len(self.control.values)} values"
            )
        return self


_SECTIONS = {
    "horizon", "initial", "numerics", "outputs", "control", "cone", "boundary", "pipeline",
}
_PARAM_SECTIONS = {"algebroid", "problem"}


def _parse_scalar(token: str) -> Any:
    token = token.strip()
    if len(token) >= 2 and token[0] == token[-1] and token[0] in "\"'":
        return token[1:-1]
    lowered = token.lower()
    if lowered in ("true", "yes", "on"):
        return True
    if lowered in ("false", "no", "off"):
        return False
    if lowered in ("none", "null"):
        return None
    if _INT.match(token):
        return int(token)
    try:
        return float(token)
    except ValueError:
        return token


def _parse_value(text: str) -> Any:
    """'a; b' is a list of rows, 'a, b' a list, anything else a scalar"""
    text = text.strip()
    if ";" in text:
        return [[_parse_scalar(t) for t in row.split(",") if t.strip()] for row in text.split(";") if row.strip()]
    if "," in text:
        return [_parse_scalar(t) for t in text.split(",") if t.strip()]
    return _parse_scalar(text)


def parse_config_text(text: str, source: str = "<config>") -> ScenarioConfig:
    """Parse ``section.key = value`` lines (``#`` starts a comment) into a ScenarioConfig"""
    data: Dict[str, Any] = {}
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in seen:
            raise ConfigError(f"{source}:{lineno}: duplicate key '{key}'")
        seen.add(key)

        parsed = _parse_value(value)
        section, _, rest = key.partition(".")
        if not rest:
            if section != "name":
                raise ConfigError(f"{source}:{lineno}: top-level key '{key}' is not known")
            data["name"] = str(parsed)
        elif section in _PARAM_SECTIONS:
            entry = data.setdefault(section, {"params": {}})
            if rest == "name":
                entry["name"] = str(parsed)
            else:
                entry["params"][rest.replace(".", "_")] = parsed
        elif section in _SECTIONS:
            data.setdefault(section, {})[rest] = parsed
        else:
            raise ConfigError(f"{source}:{lineno}: unknown section '{section}'")

    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"{source}: invalid scenario config:\n{exc}") from exc


def load_config(path: Union[str, Path]) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, source=str(path))


class Check(BaseModel):
    """One pass/fail threshold evaluated by a stage"""

    stage: str
    name: str
    value: float
    threshold: float
    passed: bool


class ScenarioReport(BaseModel):
    """Summary written to report.json"""

    name: str
    algebroid: str
    problem: Optional[str] = None
    stages: List[str] = Field(default_factory=list)
    checks: List[Check] = Field(default_factory=list)
    details: Dict[str, Any] = Field(default_factory=dict)
    artifacts: Dict[str, str] = Field(default_factory=dict)
    seed: int = DEFAULTS.sample_seed
    warnings: List[str] = Field(default_factory=list)
    passed: bool = False

    @property
    def valid(self) -> bool:
        return self.passed


@dataclass
class ScenarioState:
    """Everything the stages hand to each other"""

    config: ScenarioConfig
    alg: Any = None
    problem: Any = None
    control: Any = None
    path: Any = None
    traj: Any = None
    certificate: Any = None
    explicit_stages: bool = False
    stages_run: List[str] = field(default_factory=list)
    checks: List[Check] = field(default_factory=list)
    details: Dict[str, Any] = field(default_factory=dict)
    frames: Dict[str, pd.DataFrame] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)

    def record(self, stage: str, name: str, value: float, threshold: float) -> Check:
        check = Check(stage=stage, name=name, value=float(value), threshold=float(threshold),
                      passed=bool(value <= threshold))
        self.checks.append(check)
        return check

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)
