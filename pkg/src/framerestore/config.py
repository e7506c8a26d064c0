"""Config file loading and stable config hashing."""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

import yaml

from .errors import ConfigError

DETERMINISTIC_ENV = "FRAMERESTORE_DETERMINISTIC"


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)


def config_hash(obj) -> str:
    """Short sha256 of the canonical JSON form; insensitive to key order."""
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()[:16]


def load_config_file(path: str | Path) -> dict:
    """Read a YAML or JSON config (YAML is a superset, one parser serves both)."""
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a mapping at top level")
    return data


def deterministic_requested() -> bool:
    return os.environ.get(DETERMINISTIC_ENV, "").strip().lower() in {"1", "true", "yes", "on"}
