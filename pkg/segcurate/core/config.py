"""
Application Configuration
Process-level settings via pydantic-settings and run-config file handling
"""

import json
import logging
from pathlib import Path
from typing import Optional, Union

from pydantic import ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from segcurate.core.exceptions import ConfigurationException
from segcurate.schemas.config import CurationConfig, SynthConfig

logger = logging.getLogger(__name__)


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_prefix="SEGCURATE_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=True,
        extra="ignore",
    )

    # Application
    APP_NAME: str = "segcurate"
    VERSION: str = "1.0.0"
    ENVIRONMENT: str = "development"

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_FORMAT: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    LOG_FILE: Optional[str] = None
    LOG_MAX_SIZE: int = 10 * 1024 * 1024  # 10MB
    LOG_BACKUP_COUNT: int = 5

    # Execution
    DEFAULT_THREADS: int = 1
    OUTPUT_DIR: str = "runs"


settings = Settings()

_LOG_LEVELS = {"CRITICAL", "ERROR", "WARNING", "INFO", "DEBUG"}


def validate_settings(current: Optional[Settings] = None) -> None:
    """Validate process settings and report every problem at once"""
    current = current or settings
    errors = []

    if current.LOG_LEVEL.upper() not in _LOG_LEVELS:
        errors.append(f"LOG_LEVEL must be one of {sorted(_LOG_LEVELS)}")

    if current.DEFAULT_THREADS < 1:
        errors.append("DEFAULT_THREADS must be positive")

    if current.LOG_MAX_SIZE <= 0:
        errors.append("LOG_MAX_SIZE must be positive")

    if not current.OUTPUT_DIR:
        errors.append("OUTPUT_DIR must be set")

    if errors:
        raise ConfigurationException(f"Configuration errors: {'; '.join(errors)}")


def _read_json(path: Union[str, Path]) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = json.load(handle)
    except FileNotFoundError as e:
        raise ConfigurationException(f"Config file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigurationException(f"Config file {path} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ConfigurationException(f"Config file {path} must contain a JSON object")
    return data


def _apply_overrides(data: dict, seed: Optional[int]) -> dict:
    if seed is None:
        return data
    data = dict(data)
    for section in ("augment", "train"):
        data[section] = {**data.get(section, {}), "seed": seed}
    return data


def load_run_config(path: Optional[Union[str, Path]] = None,
                    seed: Optional[int] = None) -> CurationConfig:
    """Read a curation run config; missing sections take their defaults"""
    data = _read_json(path) if path else {}
    try:
        config = CurationConfig.model_validate(_apply_overrides(data, seed))
    except ValidationError as e:
        raise ConfigurationException(f"Invalid run config{f' {path}' if path else ''}: {e}") from e
    logger.debug(f"Run config resolved (schema v{config.schema_version})")
    return config


def load_synth_config(path: Optional[Union[str, Path]] = None,
                      seed: Optional[int] = None, **overrides) -> SynthConfig:
    """Read a synth config, applying CLI overrides on top"""
    data = _read_json(path) if path else {}
    data.update({k: v for k, v in overrides.items() if v is not None})
    if seed is not None:
        data["seed"] = seed
    try:
        return SynthConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigurationException(f"Invalid synth config: {e}") from e


def dump_run_config(config: Union[CurationConfig, SynthConfig], path: Union[str, Path]) -> None:
    """Write the resolved config beside a stage's outputs"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(config.model_dump_json(indent=2), encoding="utf-8")
    logger.debug(f"Resolved config written: {path}")
