"""
Logging Setup
Root logger configuration driven by Settings
"""

import logging
from logging.handlers import RotatingFileHandler
from typing import Optional

from segcurate.core.config import settings


def setup_logging(level: Optional[str] = None) -> None:
    """Configure the root logger once; library modules only call getLogger"""
    log_level = (level or settings.LOG_LEVEL).upper()
    handlers: list[logging.Handler] = [logging.StreamHandler()]

    if settings.LOG_FILE:
        handlers.append(
            RotatingFileHandler(
                settings.LOG_FILE,
                maxBytes=settings.LOG_MAX_SIZE,
                backupCount=settings.LOG_BACKUP_COUNT,
                encoding="utf-8",
            )
        )

    logging.basicConfig(
        level=getattr(logging, log_level, logging.INFO),
        format=settings.LOG_FORMAT,
        handlers=handlers,
        force=True,
    )
