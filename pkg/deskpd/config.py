"""Environment-driven settings and flow configuration loading."""

from __future__ import annotations

from dataclasses import dataclass
import logging
import os
from pathlib import Path
from typing import Optional

import yaml
from pydantic import ValidationError

from .errors import ConfigError
from .models import FlowConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Settings:
    """Runtime configuration shared by the CLI and the MCP server."""

    config_file: Path
    threads: int
    output_dir: Optional[Path] = None


def _parse_int_env(var: str, default: int) -> int:
    raw = os.environ.get(var)
    if raw is None or raw.strip() == "":
        return default
    try:
        value = int(raw)
    except ValueError as exc:
        raise ValueError(f"Environment variable {var} must be an integer, got {raw!r}") from exc
    return max(0, value)


def load_settings() -> Settings:
    """Build settings from environment variables with sane defaults."""

    config_file = Path(os.environ.get("DESKPD_CONFIG", "data/flow.yaml")).expanduser()
    threads = max(1, _parse_int_env("DESKPD_THREADS", 1))
    raw_out = os.environ.get("DESKPD_OUTPUT_DIR")
    output_dir = Path(raw_out).expanduser() if raw_out and raw_out.strip() else None
    return Settings(config_file=config_file, threads=threads, output_dir=output_dir)


def _resolve(base: Path, path: Path) -> Path:
    path = path.expanduser()
    return path if path.is_absolute() else (base / path)


def load_flow_config(path: Path, output_dir: Optional[Path] = None) -> FlowConfig:
    """Read a YAML flow config; relative paths resolve against the file's directory."""

    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror or exc})") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML ({exc})") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    try:
        config = FlowConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    base = path.parent
    inputs = config.inputs.model_copy(
        update={
            name: _resolve(base, value)
            for name, value in config.inputs
            if value is not None
        }
    )
    out = output_dir if output_dir is not None else _resolve(base, config.output_dir)
    config = config.model_copy(update={"inputs": inputs, "output_dir": out})
    logger.info("Loaded flow config path=%s steps=%s out=%s", path, ",".join(config.steps), out)
    return config


def check_inputs(config: FlowConfig) -> None:
    """Every configured input file must exist before a run starts."""

    missing = [
        f"{name}={value}"
        for name, value in config.inputs
        if value is not None and not Path(value).is_file()
    ]
    if missing:
        raise ConfigError("missing input files: " + ", ".join(missing))
