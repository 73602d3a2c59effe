"""
File Utilities
Output directory resolution and CSV / JSON artifact writers
"""

import os
from pathlib import Path
from typing import Optional, Union

import pandas as pd
from loguru import logger
from pydantic import BaseModel

from ..config.settings import DEFAULTS, get_settings

PathLike = Union[str, Path]


def resolve_out_dir(cli_value: Optional[PathLike] = None, config_value: Optional[PathLike] = None) -> Path:
    """--out, then the config's outputs.dir, then ALGOC_OUT_DIR, then the default"""
    for candidate in (cli_value, config_value, os.getenv("ALGOC_OUT_DIR")):
        if candidate:
            return Path(candidate)
    return Path(get_settings().out_dir)


def format_frame(frame: pd.DataFrame, digits: int = DEFAULTS.csv_digits) -> str:
    """CSV text with a header row, '.' decimals, '\\n' line ends and ``digits`` significant digits"""
    return frame.to_csv(index=False, float_format=f"%.{digits}g", lineterminator="\n")


def write_csv(frame: pd.DataFrame, path: PathLike, digits: int = DEFAULTS.csv_digits) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(format_frame(frame, digits))
    logger.debug("wrote {} ({} rows)", path, len(frame))
    return path


def write_json(model: BaseModel, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(model.model_dump_json(indent=2) + "\n", encoding="utf-8")
    logger.debug("wrote {}", path)
    return path
