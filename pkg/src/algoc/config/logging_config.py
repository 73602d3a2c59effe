"""
Logging Configuration
Sets up loguru sinks for the CLI; library modules only emit
"""

import sys
from pathlib import Path
from typing import Optional, Union

from loguru import logger

LOG_FORMAT = (
    "{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | {name}:{function} - {message}"
)


def setup_logging(
    level: str = "INFO",
    log_file: Optional[Union[str, Path]] = None,
    serialize: bool = False,
) -> None:
    """Replace the default sink by a formatted stderr sink and an optional file"""
    logger.remove()
    logger.add(sys.stderr, level=level.upper(), format=LOG_FORMAT, serialize=serialize)

    if log_file is not None:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        logger.add(
            str(log_file),
            level="DEBUG",
            format=LOG_FORMAT,
            rotation="5 MB",
            retention=3,
            serialize=serialize,
        )
