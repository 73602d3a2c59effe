"""
Tests for the algoc command line
"""

import pytest

from algoc.app import VERB_STAGES, build_parser, main


def test_list_prints_the_builtins(capsys):
    assert main(["list"]) == 0
    out = capsys.readouterr().out
    assert "so3_two_axis" in out
    assert "wong_residual_circle_bundle" in out


def test_check_axioms_reports_the_jacobi_failure(scenario_dir, tmp_path, capsys):
    code = main(["check-axioms", "--config", str(scenario_dir / "so3_deformed_axioms.cfg"), "--out", str(tmp_path)])
    assert code == 1
    out = capsys.readouterr().out
    assert "axioms.jacobi" in out
    assert "FAIL" in out
    assert (tmp_path / "report.json").exists()


def test_check_axioms_on_a_builtin(tmp_path, capsys):
    assert main(["check-axioms", "--scenario", "so3_two_axis", "--out", str(tmp_path), "--log-level", "WARNING"]) == 0
    assert "PASS" in capsys.readouterr().out


def test_unknown_scenario_is_a_usage_error(tmp_path, capsys):
    assert main(["run", "--scenario", "nope", "--out", str(tmp_path)]) == 2
    assert "nope" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert main(["check-axioms", "--config", str(tmp_path / "absent.cfg")]) == 2


@pytest.mark.parametrize("flag", [["--steps", "0"], ["--tol", "-1"]])
def test_bad_overrides(tmp_path, flag):
    assert main(["simulate", "--scenario", "tangent_lqr_1d", "--out", str(tmp_path)] + flag) == 2


def test_stage_failure_maps_to_its_exit_code(tmp_path):
    cfg = tmp_path / "no_problem.cfg"
    cfg.write_text("name = bare\nalgebroid.name = so3\n", encoding="utf-8")
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "out")]) == 2


def test_simulate_with_overrides(tmp_path):
    code = main(["simulate", "--scenario", "tangent_lqr_1d", "--out", str(tmp_path), "--steps", "200", "--tol", "1e-5"])
    assert code == 0
    assert (tmp_path / "path.csv").exists()
    assert (tmp_path / "extremal.csv").exists()


def test_source_is_required():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["run"])
    with pytest.raises(SystemExit):
        build_parser().parse_args(["run", "--config", "a.cfg", "--scenario", "b"])


def test_every_verb_has_a_subcommand():
    parser = build_parser()
    for verb in VERB_STAGES:
        args = parser.parse_args([verb, "--scenario", "so3_two_axis"])
        assert args.verb == verb
