"""
Centralized logging configuration
All modules obtain their logger through get_logger()
"""
import logging
import sys
from typing import Optional

from .settings import get_settings

LOG_FORMAT = "%(asctime)s | %(levelname)-8s | %(name)s | %(message)s"
ROOT_LOGGER_NAME = "orthoplane"

_configured = False


def setup_logging(level: Optional[str] = None) -> None:
    """
    Configure the package root logger once.

    Args:
        level: Level name; falls back to ORTHOPLANE_LOG_LEVEL, then INFO
    """
    global _configured

    level_name = (level or get_settings().log_level).upper()
    root = logging.getLogger(ROOT_LOGGER_NAME)
    root.setLevel(getattr(logging, level_name, logging.INFO))

    if not _configured:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        root.addHandler(handler)
        root.propagate = False
        _configured = True


def get_logger(name: str) -> logging.Logger:
    """Get a logger namespaced under the package root"""
    if not name.startswith(ROOT_LOGGER_NAME):
        name = f"{ROOT_LOGGER_NAME}.{name}"
    return logging.getLogger(name)
