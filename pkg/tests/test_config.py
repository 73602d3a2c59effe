"""
Tests for the scenario config format and its validation
"""

import pytest

from algoc.components.builtins import BUILTINS
from algoc.utils.errors import ConfigError
from algoc.workflows.state import STAGE_ORDER, load_config, parse_config_text

BASE = """
# comment line
name = demo
algebroid.name = tangent
algebroid.n = 2
"""


def test_parse_sections_and_values():
    config = parse_config_text(
        BASE
        + """
problem.name = pendulum
problem.bound = 0.5   # trailing comment
horizon.t1 = 3
horizon.mode = "fixed"
initial.x0 = 0.5, 0
initial.xi = 1, -1
control.breakpoints = 0, 1, 3
control.values = 1, -1
boundary.S0 = 1, 0; 0, 1
boundary.extended = yes
numerics.require_jacobi = true
"""
    )
    assert config.name == "demo"
    assert config.algebroid.params == {"n": 2}
    assert config.problem.params == {"bound": 0.5}
    assert config.horizon.t1 == 3.0
    assert config.initial.x0 == [0.5, 0.0]
    assert config.initial.xi0 == -1.0
    assert config.control.values == [[1.0], [-1.0]]
    assert config.boundary.S0 == [[1.0, 0.0], [0.0, 1.0]]
    assert config.boundary.extended
    assert config.numerics.require_jacobi
    assert config.pipeline.stages == STAGE_ORDER


def test_scalar_becomes_single_entry_list():
    config = parse_config_text(BASE + "initial.x0 = 1\nboundary.S1 = 1\n")
    assert config.initial.x0 == [1.0]
    assert config.boundary.S1 == [[1.0]]


def test_stages_follow_pipeline_order():
    config = parse_config_text(BASE + "pipeline.stages = checks, axioms\n")
    assert config.pipeline.stages == ["axioms", "checks"]


@pytest.mark.parametrize(
    "extra",
    [
        "algebroid.n = 3\n",  # duplicate key
        "solver.steps = 3\n",
        "steps = 3\n",
        "horizon.t1\n",
        " = 3\n",
        "initial.xi0 = 0.5\n",
        "pipeline.stages = axioms, plot\n",
        "control.breakpoints = 0, 1, 2\ncontrol.values = 1\n",
        "problem.name = nope\n",
        "pipeline.builtin = nope\n",
        "horizon.t0 = 2\nhorizon.t1 = 1\n",
        "horizon.mode = open\n",
        "numerics.steps = 0\n",
    ],
)
def test_invalid_configs(extra):
    with pytest.raises(ConfigError):
        parse_config_text(BASE + extra)


def test_unknown_algebroid():
    with pytest.raises(ConfigError):
        parse_config_text("algebroid.name = nope\n")


def test_missing_algebroid_section():
    with pytest.raises(ConfigError):
        parse_config_text("name = empty\n")


def test_abnormal_multiplier_is_accepted():
    assert parse_config_text(BASE + "initial.xi0 = 0\n").initial.xi0 == 0.0


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.cfg")


def test_shipped_scenarios_load(scenario_dir):
    files = sorted(scenario_dir.glob("*.cfg"))
    assert len(files) >= 4
    for path in files:
        config = load_config(path)
        assert config.name == path.stem


def test_builtin_configs_parse():
    for name, builtin in BUILTINS.items():
        config = parse_config_text(builtin.config_text, source=name)
        assert config.name == name
        assert config.pipeline.builtin == name
