"""
Settings
Numerical defaults with .env and ALGOC_* environment overrides
"""

import os
from functools import lru_cache
from typing import Optional

from dotenv import load_dotenv
from pydantic import BaseModel, Field


class Settings(BaseModel):
    """Default tolerances and resolutions used across the services"""

    model_config = {"frozen": True}

    fd_step: float = Field(1e-6, gt=0)
    tol_axiom_analytic: float = 1e-8
    tol_axiom_fd: float = 1e-5
    axiom_samples: int = Field(100, ge=1)
    sample_seed: int = 20240601
    steps_per_segment: int = Field(200, ge=1)
    overflow_guard: float = 1e12
    tol_join: float = 1e-9
    tol_adm: float = 1e-6
    tol_switch: float = 1e-10
    max_switches: int = 50
    extremal_steps: int = Field(1200, ge=1)
    singular_gap_tol: float = 1e-9
    feas_tol: float = 1e-9
    pmp_tol: float = 1e-6
    csv_digits: int = 12
    out_dir: str = "algoc_out"
    log_level: str = "INFO"


_ENV_FIELDS = {
    "ALGOC_OUT_DIR": ("out_dir", str),
    "ALGOC_LOG_LEVEL": ("log_level", str),
    "ALGOC_STEPS": ("steps_per_segment", int),
    "ALGOC_SEED": ("sample_seed", int),
}


@lru_cache(maxsize=1)
def get_settings(env_file: Optional[str] = None) -> Settings:
    """Load .env once and build the settings from ALGOC_* variables"""
    load_dotenv(env_file, override=False)

    overrides = {}
    for var, (field, cast) in _ENV_FIELDS.items():
        raw = os.getenv(var)
        if raw:
            overrides[field] = cast(raw)

    return Settings(**overrides)


DEFAULTS = Settings()
