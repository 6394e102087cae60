"""
Core Configuration Management

This module handles process-level settings for the Identity Cleanup
simulator and sets up logging. Experiment parameters live in the
experiment document (see app.utils.config_parser), not here.
"""

import logging
import sys
from typing import Literal

from pydantic_settings import BaseSettings, SettingsConfigDict
from pythonjsonlogger import jsonlogger


class Settings(BaseSettings):
    """Process settings loaded from environment variables and .env."""

    model_config = SettingsConfigDict(env_file=".env", case_sensitive=True, extra="ignore")

    PROJECT_NAME: str = "Identity Cleanup"
    VERSION: str = "1.0.0"

    # Logging Configuration
    LOG_LEVEL: str = "INFO"
    LOG_FORMAT: Literal["text", "json"] = "text"

    # Experiment defaults
    DEFAULT_OUTPUT_DIR: str = "results"
    MAX_WORKERS: int = 1


# Global settings instance
settings = Settings()

_TEXT_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging(level: str | None = None) -> None:
    """
    Install a single stream handler on the root logger.

    Args:
        level: Overrides settings.LOG_LEVEL when given.
    """
    handler = logging.StreamHandler(sys.stderr)
    if settings.LOG_FORMAT == "json":
        handler.setFormatter(jsonlogger.JsonFormatter("%(asctime)s %(levelname)s %(name)s %(message)s"))
    else:
        handler.setFormatter(logging.Formatter(_TEXT_FORMAT))

    root = logging.getLogger()
    for existing in list(root.handlers):
        root.removeHandler(existing)
    root.addHandler(handler)
    root.setLevel((level or settings.LOG_LEVEL).upper())
