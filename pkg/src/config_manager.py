"""Configuration management: runtime settings and pipeline documents."""

import copy
import json
import os
from pathlib import Path
from typing import Any, Dict, Optional

import toml
import yaml
from loguru import logger

DEFAULT_SETTINGS: Dict[str, Dict[str, Any]] = {
    "runtime": {
        "threads": 0,
    },
    "persistence": {
        "memory_budget": 200_000_000,
        "native_max_points": 100,
    },
    "logging": {
        "level": "WARNING",
        "file": "",
        "rotation": "10 MB",
    },
}


class ConfigError(Exception):
    """Base class for configuration errors."""
    pass


class Config:
    """Runtime settings for the command-line tools.

    Values come from the built-in defaults, then the TOML settings file (if
    present), then ``CMAP_SECTION_KEY`` environment variables.
    """

    def __init__(
        self,
        config_file: Path = Path("cmap.toml"),
        env_prefix: str = "CMAP_",
    ):
        """Initialize configuration manager.

        Args:
            config_file: Path to TOML settings file
            env_prefix: Prefix for environment variables
        """
        self.config_file = Path(config_file)
        self.env_prefix = env_prefix
        self.data: Dict[str, Any] = {}
        self.load()

    def load(self) -> None:
        """Load configuration from defaults, file and environment."""
        self.data = copy.deepcopy(DEFAULT_SETTINGS)
        if self.config_file.exists():
            try:
                loaded = toml.load(self.config_file)
            except toml.TomlDecodeError as e:
                raise ConfigError(f"Failed to parse config file: {e}")
            except OSError as e:
                raise ConfigError(f"Failed to read config file: {e}")
            for section, values in loaded.items():
                if not isinstance(values, dict):
                    raise ConfigError(f"Top-level key {section} must be a section")
                self.data.setdefault(section, {}).update(values)
            logger.debug(f"Loaded configuration from {self.config_file}")

        self._apply_env_overrides()
        self._validate_config()

    def _apply_env_overrides(self) -> None:
        for key, value in os.environ.items():
            if not key.startswith(self.env_prefix):
                continue
            # CMAP_PERSISTENCE_MEMORY_BUDGET -> persistence.memory_budget
            section, _, name = key[len(self.env_prefix):].lower().partition("_")
            if not name:
                continue
            default = DEFAULT_SETTINGS.get(section, {}).get(name)
            self.set(f"{section}.{name}", self._coerce(value, default, key))

    @staticmethod
    def _coerce(value: str, default: Any, key: str) -> Any:
        if isinstance(default, bool):
            return value.lower() in ("1", "true", "yes", "on")
        if isinstance(default, int):
            try:
                return int(value)
            except ValueError:
                raise ConfigError(f"{key} must be an integer, got {value!r}")
        return value

    def _validate_config(self) -> None:
        threads = self.get("runtime.threads")
        if not isinstance(threads, int) or threads < 0:
            raise ConfigError("runtime.threads must be a nonnegative integer")

        for key in ("persistence.memory_budget", "persistence.native_max_points"):
            value = self.get(key)
            if not isinstance(value, int) or value < 1:
                raise ConfigError(f"{key} must be a positive integer")

        level = str(self.get("logging.level", "WARNING")).upper()
        if level not in ("TRACE", "DEBUG", "INFO", "SUCCESS", "WARNING", "ERROR", "CRITICAL"):
            raise ConfigError(f"logging.level {level!r} is not a log level")

    def get(self, key: str, default: Any = None) -> Any:
        """Get configuration value by key.

        Args:
            key: Dot-notation key (e.g. "runtime.threads")
            default: Default value if key not found

        Returns:
            Configuration value
        """
        try:
            value = self.data
            for part in key.split("."):
                value = value[part]
            return value
        except (KeyError, TypeError):
            return default

    def set(self, key: str, value: Any) -> None:
        parts = key.split(".")
        current = self.data
        for part in parts[:-1]:
            current = current.setdefault(part, {})
        current[parts[-1]] = value

    def threads(self) -> Optional[int]:
        """Worker thread count, ``None`` meaning the available parallelism."""
        return self.get("runtime.threads") or None


def load_document(path: Path) -> Dict[str, Any]:
    """Load a JSON, TOML or YAML mapping, chosen by file extension."""
    path = Path(path)
    suffix = path.suffix.lower()
    try:
        with open(path, encoding="utf-8") as f:
            if suffix == ".json":
                data = json.load(f)
            elif suffix == ".toml":
                data = toml.load(f)
            elif suffix in (".yaml", ".yml"):
                data = yaml.safe_load(f)
            else:
                raise ConfigError(f"Unsupported config format: {suffix or '(none)'}")
    except OSError as e:
        raise ConfigError(f"Failed to read {path}: {e}")
    except (json.JSONDecodeError, toml.TomlDecodeError, yaml.YAMLError) as e:
        raise ConfigError(f"Failed to parse {path}: {e}")
    if not isinstance(data, dict):
        raise ConfigError(f"{path} does not contain a mapping")
    return data
