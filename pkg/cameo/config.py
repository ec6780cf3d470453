"""
Run configuration: flat `key = value` files, command-line overrides and log setup.

Precedence is defaults < config file < flags. `render_config` writes the
resolved configuration back in the same format, so its output can be loaded
again as a config file.
"""
import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

from pydantic import ValidationError

from .clickstream import Window, parse_timestamp
from .schema import RunConfig

logger = logging.getLogger(__name__)

LOG_ENV = "CAMEO_LOG"
LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "warning": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}


class ConfigError(ValueError):
    """Invalid configuration: unknown keys, out-of-domain values or missing files."""

    def __init__(self, message: str, unknown_keys: Optional[List[str]] = None):
        super().__init__(message)
        self.unknown_keys = unknown_keys or []


def configure_logging(value: Optional[str] = None) -> int:
    """Set the root log level from CAMEO_LOG (error|warn|info|debug); unknown values fall back to warn."""
    name = (value if value is not None else os.environ.get(LOG_ENV, "warn")).strip().lower()
    level = LOG_LEVELS.get(name)
    logging.basicConfig(level=level or logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", force=True)
    if level is None:
        logger.warning("unknown %s value %r; using warn", LOG_ENV, name)
        return logging.WARNING
    return level


def parse_config_text(text: str, source: str = "<config>") -> Dict[str, str]:
    values: Dict[str, str] = {}
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{line_number}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{line_number}: missing key")
        values[key] = value
    return values


def _describe(exc: ValidationError) -> str:
    problems = []
    for error in exc.errors():
        where = ".".join(str(part) for part in error["loc"]) or "config"
        problems.append(f"{where}: {error['msg']}")
    return "invalid configuration: " + "; ".join(problems)


def resolve_config(file_values: Mapping[str, Any], overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """Merge file values and flag overrides over the defaults; None or empty means 'not set'."""
    merged = {k: v for k, v in file_values.items() if v not in (None, "")}
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})

    unknown = sorted(set(merged) - set(RunConfig.model_fields))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}", unknown)
    try:
        return RunConfig(**merged)
    except ValidationError as exc:
        raise ConfigError(_describe(exc)) from exc


def load_run_config(path: Optional[str] = None, overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    file_values: Dict[str, str] = {}
    if path:
        config_path = Path(path)
        if not config_path.is_file():
            raise ConfigError(f"config file not found: {path}")
        file_values = parse_config_text(config_path.read_text(encoding="utf-8"), str(path))
        logger.debug("read %d keys from %s", len(file_values), path)
    return resolve_config(file_values, overrides)


def _format_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple)):
        return ",".join(str(v) for v in value)
    return str(value)


def render_config(config: RunConfig) -> str:
    return "".join(f"{key} = {_format_value(value)}\n" for key, value in config.model_dump().items())


def analysis_window(config: RunConfig) -> Optional[Window]:
    if config.window_start is None and config.window_end is None:
        return None
    try:
        start = parse_timestamp(config.window_start) if config.window_start else None
        end = parse_timestamp(config.window_end) if config.window_end else None
    except ValueError as exc:
        raise ConfigError(f"invalid analysis window: {exc}") from exc
    if start is not None and end is not None and end < start:
        raise ConfigError("window_end is before window_start")
    return start, end


def effective_jobs(config: RunConfig) -> int:
    """jobs = 0 means one worker per available core."""
    return config.jobs or os.cpu_count() or 1


def check_output_dir(path: str) -> Path:
    """Fail before any work when the output directory cannot be created or written."""
    target = Path(path)
    if target.exists() and not target.is_dir():
        raise ConfigError(f"output path is not a directory: {path}")
    existing = target
    while not existing.exists():
        existing = existing.parent
    if not existing.is_dir():
        raise ConfigError(f"output path is not a directory: {existing}")
    if not os.access(existing, os.W_OK | os.X_OK):
        raise ConfigError(f"output directory is not writable: {existing}")
    return target
