"""
Tests for settings, output helpers, exit codes, logging setup and the RK4 step
"""

from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from loguru import logger

from algoc.config.logging_config import setup_logging
from algoc.config.settings import Settings, get_settings
from algoc.utils.errors import (
    ChatteringError,
    ConfigError,
    DivergenceError,
    NeedleError,
    PipelineError,
    exit_code_for,
)
from algoc.utils.file_utils import format_frame, resolve_out_dir, write_csv, write_json
from algoc.utils.numerics import rk4_step


@pytest.fixture
def fresh_settings():
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


def test_environment_overrides(monkeypatch, fresh_settings, tmp_path):
    monkeypatch.setenv("ALGOC_STEPS", "50")
    monkeypatch.setenv("ALGOC_SEED", "7")
    monkeypatch.setenv("ALGOC_LOG_LEVEL", "DEBUG")
    settings = get_settings(str(tmp_path / "missing.env"))
    assert settings.steps_per_segment == 50
    assert settings.sample_seed == 7
    assert settings.log_level == "DEBUG"


def test_settings_are_validated():
    with pytest.raises(ValueError):
        Settings(steps_per_segment=0)
    assert Settings().csv_digits == 12


def test_out_dir_resolution_order(monkeypatch, fresh_settings):
    monkeypatch.setenv("ALGOC_OUT_DIR", "from_env")
    assert resolve_out_dir("cli", "cfg") == Path("cli")
    assert resolve_out_dir(None, "cfg") == Path("cfg")
    assert resolve_out_dir() == Path("from_env")
    monkeypatch.delenv("ALGOC_OUT_DIR")
    assert resolve_out_dir() == Path(Settings().out_dir)


def test_csv_format():
    frame = pd.DataFrame({"t": [0.0, 1.0 / 3.0], "x_1": [1e-20, 2.5]})
    text = format_frame(frame)
    assert text.splitlines() == ["t,x_1", "0,1e-20", "0.333333333333,2.5"]
    assert "\r" not in text


def test_writers_create_parents(tmp_path):
    path = write_csv(pd.DataFrame({"a": [1.0]}), tmp_path / "nested" / "a.csv")
    assert path.read_text(encoding="utf-8") == "a\n1\n"
    report = write_json(Settings(), tmp_path / "deeper" / "settings.json")
    assert '"csv_digits": 12' in report.read_text(encoding="utf-8")


def test_exit_codes():
    assert exit_code_for(None) == 0
    assert exit_code_for(ConfigError("x")) == 2
    assert exit_code_for(NeedleError("x")) == 2
    assert exit_code_for(ChatteringError("x")) == 3
    assert exit_code_for(RuntimeError("x")) == 3
    assert PipelineError("cone", NeedleError("x")).exit_code == 2
    assert PipelineError("cone", DivergenceError("blew up", last_time=0.5)).exit_code == 3


def test_divergence_error_keeps_the_time():
    error = DivergenceError("state diverged", last_time=1.25)
    assert error.last_time == 1.25
    assert "1.25" in str(error)


def test_logging_to_file(tmp_path):
    log_file = tmp_path / "logs" / "algoc.log"
    setup_logging("WARNING", log_file=log_file)
    logger.debug("written to the file only")
    setup_logging("INFO")
    assert "written to the file only" in log_file.read_text(encoding="utf-8")


def test_rk4_error_shrinks_sixteenfold():
    errors = []
    for steps in (10, 20):
        h = 1.0 / steps
        y = np.array([1.0])
        for k in range(steps):
            y = rk4_step(lambda t, y: y, k * h, y, h)
        errors.append(abs(y[0] - np.e))
    assert 12.0 <= errors[0] / errors[1] <= 20.0
