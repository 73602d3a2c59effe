"""
Scenario Workflow
Runs the requested stages of a scenario in order and emits its artifacts
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Union

from loguru import logger

from ..components.builtins import get_builtin
from ..utils.errors import AlgocError, PipelineError
from ..utils.file_utils import resolve_out_dir
from .nodes import STAGES, setup_models, write_artifacts
from .state import STAGE_ORDER, ScenarioConfig, ScenarioReport, ScenarioState, parse_config_text


@dataclass
class ScenarioResult:
    """Report, output directory and exit status of one run"""

    report: ScenarioReport
    out_dir: Path
    state: ScenarioState

    @property
    def exit_code(self) -> int:
        return 0 if self.report.passed else 1


def builtin_config(name: str) -> ScenarioConfig:
    builtin = get_builtin(name)
    return parse_config_text(builtin.config_text, source=f"builtin:{name}")


class ScenarioWorkflow:
    """Stage pipeline: axioms, extremal, simulate, residuals, transport, cone, checks"""

    def __init__(self, config: ScenarioConfig, stages: Optional[Iterable[str]] = None):
        self.config = config
        self.logger = logger.bind(scenario=config.name)
        self.explicit = stages is not None
        requested = list(config.pipeline.stages) if stages is None else list(stages)
        unknown = [s for s in requested if s not in STAGE_ORDER]
        if unknown:
            raise PipelineError("setup", ValueError(f"unknown stages {unknown}"))
        self.stages = [s for s in STAGE_ORDER if s in requested]

    def _run_stage(self, name: str, state: ScenarioState) -> None:
        self.logger.info("{}: stage '{}' started", self.config.name, name)
        step = setup_models if name == "setup" else STAGES[name]
        try:
            step(state)
        except PipelineError:
            raise
        except (AlgocError, ValueError, ArithmeticError, KeyError) as exc:
            self.logger.error("{}: stage '{}' failed: {}", self.config.name, name, exc)
            raise PipelineError(name, exc) from exc
        if name != "setup":
            state.stages_run.append(name)
        failed = [c.name for c in state.checks if c.stage == name and not c.passed]
        if failed:
            self.logger.warning("{}: stage '{}' missed thresholds: {}", self.config.name, name, ", ".join(failed))
        else:
            self.logger.info("{}: stage '{}' finished", self.config.name, name)

    def run(self, out_dir: Optional[Union[str, Path]] = None) -> ScenarioResult:
        state = ScenarioState(config=self.config, explicit_stages=self.explicit)
        self._run_stage("setup", state)
        for name in self.stages:
            self._run_stage(name, state)

        target = resolve_out_dir(out_dir, self.config.outputs.dir)
        if out_dir is None and self.config.outputs.dir is None:
            target = target / self.config.name
        try:
            report = write_artifacts(state, target)
        except OSError as exc:
            raise PipelineError("write", exc) from exc
        self.logger.info(
            "{}: {} ({} checks, {} failed) -> {}",
            self.config.name,
            "passed" if report.passed else "FAILED",
            len(report.checks),
            sum(not c.passed for c in report.checks),
            target,
        )
        return ScenarioResult(report=report, out_dir=target, state=state)


def run_scenario(
    config: Union[ScenarioConfig, str],
    stages: Optional[Iterable[str]] = None,
    out_dir: Optional[Union[str, Path]] = None,
) -> ScenarioResult:
    """Run a config object or a builtin name; ``stages`` overrides pipeline.stages"""
    if isinstance(config, str):
        config = builtin_config(config)
    return ScenarioWorkflow(config, stages).run(out_dir)
