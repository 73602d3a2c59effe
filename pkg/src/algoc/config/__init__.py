from .logging_config import setup_logging
from .settings import DEFAULTS, Settings, get_settings

__all__ = ["DEFAULTS", "Settings", "get_settings", "setup_logging"]
