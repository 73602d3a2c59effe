"""
End-to-end scenario runs through the stage pipeline
"""

import json

import pytest
from loguru import logger

from algoc.utils.errors import ConfigError, PipelineError
from algoc.workflows.scenario_workflow import ScenarioWorkflow, builtin_config, run_scenario
from algoc.workflows.state import load_config, parse_config_text


def test_atiyah_crosscheck_writes_report(tmp_path):
    result = run_scenario("atiyah_hamiltonian_crosscheck", out_dir=tmp_path)
    assert result.exit_code == 0
    assert result.report.stages == ["axioms", "checks"]
    report = json.loads((tmp_path / "report.json").read_text(encoding="utf-8"))
    assert report["passed"] is True
    assert {c["name"] for c in report["checks"]} >= {"skew", "almost_lie", "field_difference"}


def test_stage_logs_carry_the_scenario_name(tmp_path):
    records = []
    sink = logger.add(lambda message: records.append(message.record), level="INFO")
    try:
        run_scenario("atiyah_hamiltonian_crosscheck", out_dir=tmp_path)
    finally:
        logger.remove(sink)
    stage_records = [r for r in records if "stage" in r["message"]]
    assert stage_records
    assert all(r["extra"].get("scenario") == "atiyah_hamiltonian_crosscheck" for r in stage_records)


@pytest.mark.slow
def test_lqr_builtin_passes(tmp_path):
    result = run_scenario("tangent_lqr_1d", out_dir=tmp_path)
    assert result.exit_code == 0, [c for c in result.report.checks if not c.passed]
    for name in ("path", "extremal", "transport"):
        assert (tmp_path / f"{name}.csv").exists()
    assert not (tmp_path / "cone.csv").exists()
    names = {c.name for c in result.report.checks}
    assert {"transversality", "pairing_drift", "state_error", "terminal_costate"} <= names


@pytest.mark.slow
@pytest.mark.parametrize("name", ["so3_two_axis", "chaplygin_sleigh", "euler_poincare_rigid_body", "wong_residual_circle_bundle"])
def test_trajectory_builtins_pass(tmp_path, name):
    result = run_scenario(name, out_dir=tmp_path)
    failed = [c for c in result.report.checks if not c.passed]
    assert result.exit_code == 0, failed


@pytest.mark.slow
def test_shipped_lqr_scenario_passes(scenario_dir, tmp_path):
    result = run_scenario(load_config(scenario_dir / "lqr_free_end.cfg"), out_dir=tmp_path)
    assert result.exit_code == 0


def test_pendulum_scenario_keeps_the_pairing(scenario_dir, tmp_path):
    result = run_scenario(load_config(scenario_dir / "pendulum_bang.cfg"), out_dir=tmp_path)
    assert result.exit_code == 0
    assert result.report.stages == ["axioms", "simulate", "transport"]
    assert sorted(p.name for p in tmp_path.iterdir()) == ["path.csv", "report.json", "transport.csv"]
    header = (tmp_path / "transport.csv").read_text(encoding="utf-8").splitlines()[0]
    assert header == "t,x_1,x_2,b_1,b_2,b_3"


def test_deformed_bracket_fails_the_jacobi_threshold(scenario_dir, tmp_path):
    result = run_scenario(load_config(scenario_dir / "so3_deformed_axioms.cfg"), out_dir=tmp_path)
    assert result.exit_code == 1
    failed = [c.name for c in result.report.checks if not c.passed]
    assert failed == ["jacobi"]
    assert result.report.details["axioms"]["is_lie"] is False


def test_explicit_stages_override_the_config(tmp_path):
    config = builtin_config("so3_two_axis")
    result = run_scenario(config, stages=["axioms"], out_dir=tmp_path)
    assert result.report.stages == ["axioms"]
    assert result.exit_code == 0


def test_unknown_stage_is_a_setup_error():
    with pytest.raises(PipelineError) as info:
        ScenarioWorkflow(builtin_config("so3_two_axis"), stages=["plot"])
    assert info.value.stage == "setup"


def test_stage_errors_are_wrapped(tmp_path):
    config = parse_config_text("algebroid.name = so3\npipeline.stages = simulate\n")
    with pytest.raises(PipelineError) as info:
        run_scenario(config, out_dir=tmp_path)
    assert info.value.stage == "simulate"
    assert isinstance(info.value.cause, ConfigError)
    assert info.value.exit_code == 2


def test_unknown_builtin_name():
    with pytest.raises(KeyError):
        builtin_config("nope")


def test_default_output_directory_uses_the_scenario_name(tmp_path, monkeypatch):
    monkeypatch.setenv("ALGOC_OUT_DIR", str(tmp_path))
    result = run_scenario("atiyah_hamiltonian_crosscheck")
    assert result.out_dir == tmp_path / "atiyah_hamiltonian_crosscheck"
    assert (result.out_dir / "report.json").exists()
