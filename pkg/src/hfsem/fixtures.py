"""Access to the bundled model, system and experiment configurations."""

from __future__ import annotations

import json
from importlib import resources

from .errors import ConfigError


def _read_dir(kind: str) -> dict:
    root = resources.files("hfsem") / "configs" / kind
    out = {}
    for entry in root.iterdir():
        if entry.name.endswith(".json"):
            out[entry.name[: -len(".json")]] = entry
    return out


def model_names() -> list:
    """Names of the bundled model and true-system configurations."""
    return sorted(_read_dir("models"))


def experiment_names() -> list:
    return sorted(_read_dir("experiments"))


def load_model(name: str) -> dict:
    files = _read_dir("models")
    if name not in files:
        raise ConfigError(f"unknown bundled model '{name}' (have: {', '.join(sorted(files))})")
    return json.loads(files[name].read_text())


def load_experiment(name: str) -> dict:
    files = _read_dir("experiments")
    if name not in files:
        raise ConfigError(f"unknown bundled experiment '{name}' (have: {', '.join(sorted(files))})")
    return json.loads(files[name].read_text())
