"""Configuration management for steermetrics.

This module loads environment settings (optionally from a ``.env`` file) and
reads JSON configuration files into validated Pydantic models.
"""

import json
import logging
import os
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import TypeVar

from dotenv import find_dotenv, load_dotenv
from pydantic import BaseModel, ValidationError

from exceptions import InvalidConfigError, MissingInputError

logger = logging.getLogger(__name__)

__all__ = [
    "TOOL_VERSION",
    "JOBS",
    "LOG_LEVEL",
    "load_model_file",
]

load_dotenv(find_dotenv(usecwd=True))

try:
    TOOL_VERSION: str = version("steermetrics")
except PackageNotFoundError:
    TOOL_VERSION = "0.1.0"

# Logging level for the CLI when --verbose is not given
LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO").upper()

# Worker processes for per-drive fan-out; 1 runs serially
_DEFAULT_JOBS = 1


def _parse_jobs() -> int:
    """Parse STEERMETRICS_JOBS with error handling."""
    value = os.getenv("STEERMETRICS_JOBS", str(_DEFAULT_JOBS))
    try:
        jobs = int(value)
    except ValueError:
        logger.warning(
            "Invalid STEERMETRICS_JOBS value '%s', using default %d",
            value,
            _DEFAULT_JOBS,
        )
        return _DEFAULT_JOBS
    if jobs < 1:
        logger.warning("STEERMETRICS_JOBS must be >= 1, got %d; using 1", jobs)
        return 1
    return jobs


JOBS: int = _parse_jobs()

ModelT = TypeVar("ModelT", bound=BaseModel)


def load_model_file(path: Path, model: type[ModelT]) -> ModelT:
    """
    Read a JSON file and validate it into ``model``.

    Args:
        path: JSON file to read.
        model: Pydantic model class to validate against.

    Returns:
        The validated model instance.

    Raises:
        MissingInputError: If the file does not exist.
        InvalidConfigError: If the file is not valid JSON or fails
            validation; ``field`` names the first offending field.
    """
    if not path.is_file():
        raise MissingInputError(f"Config file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise InvalidConfigError(f"{path}: invalid JSON ({e.msg} at line {e.lineno})") from e

    try:
        return model.model_validate(raw)
    except ValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(part) for part in first["loc"]) or None
        logger.debug("Config %s failed validation: %s", path, e)
        raise InvalidConfigError(first["msg"], field=field) from e
