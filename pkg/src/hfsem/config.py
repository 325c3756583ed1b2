"""Parsing of JSON configuration documents.

Three document kinds exist: "diffusion-system" (a true model to simulate
from), "lisrel-model" (a parametric covariance structure to fit) and
"experiment" (a Monte Carlo study tying the two together).  Experiment
documents may reference bundled fixtures by name, a JSON file by path,
or carry the documents inline.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import fixtures
from .errors import ConfigError
from .model import ModelSpec, parse_model_config
from .sde import DiffusionSystem, SamplingGrid, ou_drift
from .sparse import PenaltyConfig


def _matrix(doc, key, context) -> np.ndarray:
    try:
        return np.atleast_2d(np.asarray(doc[key], dtype=float))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{context}: bad or missing matrix '{key}'") from exc


def parse_system_config(doc: dict) -> DiffusionSystem:
    """Build the simulated true model from a diffusion-system document."""
    procs = doc.get("processes")
    loadings = doc.get("loadings")
    if not isinstance(procs, dict) or not isinstance(loadings, dict):
        raise ConfigError("system config needs 'processes' and 'loadings' sections")
    drifts, s_mats, c0s = [], [], []
    for pname in ("xi", "delta", "eps", "zeta"):
        block = procs.get(pname)
        if block is None:
            raise ConfigError(f"system config is missing process '{pname}'")
        a = _matrix(block, "a", f"process {pname}")
        b = np.atleast_1d(np.asarray(block.get("b", np.zeros(a.shape[0])), dtype=float))
        drifts.append(ou_drift(a, b))
        s_mats.append(_matrix(block, "s", f"process {pname}"))
        c0 = np.atleast_1d(np.asarray(block.get("c0", np.zeros(a.shape[0])), dtype=float))
        c0s.append(c0)
    lx1 = _matrix(loadings, "lambda_x1", "loadings")
    lx2 = _matrix(loadings, "lambda_x2", "loadings")
    gamma = _matrix(loadings, "gamma", "loadings")
    b_mat = _matrix(loadings, "b", "loadings") if "b" in loadings \
        else np.zeros((lx2.shape[1], lx2.shape[1]))
    return DiffusionSystem(
        drift_xi=drifts[0], drift_delta=drifts[1], drift_eps=drifts[2], drift_zeta=drifts[3],
        s1=s_mats[0], s2=s_mats[1], s3=s_mats[2], s4=s_mats[3],
        c1=c0s[0], c2=c0s[1], c3=c0s[2], c4=c0s[3],
        lx1=lx1, lx2=lx2, gamma=gamma, b_mat=b_mat,
    )


def _load_document(ref, expect_kind: str) -> dict:
    """Resolve a fixture name, file path or inline dict into a document."""
    if isinstance(ref, dict):
        doc = ref
    elif isinstance(ref, str):
        if ref.endswith(".json") or os.sep in ref:
            try:
                with open(ref) as fh:
                    doc = json.load(fh)
            except OSError as exc:
                raise ConfigError(f"cannot read config file '{ref}': {exc}") from exc
            except json.JSONDecodeError as exc:
                raise ConfigError(f"invalid JSON in '{ref}': {exc}") from exc
        else:
            doc = fixtures.load_model(ref)
    else:
        raise ConfigError(f"expected a name, path or inline document, got {type(ref).__name__}")
    kind = doc.get("kind")
    if kind != expect_kind:
        raise ConfigError(f"document '{doc.get('name', '?')}' has kind '{kind}', expected '{expect_kind}'")
    return doc


def load_system(ref) -> tuple[DiffusionSystem, dict]:
    doc = _load_document(ref, "diffusion-system")
    return parse_system_config(doc), doc


def load_model_spec(ref) -> tuple[ModelSpec, dict]:
    doc = _load_document(ref, "lisrel-model")
    return parse_model_config(doc), doc


def resolve_penalty(doc: Optional[dict], n: int) -> Optional[PenaltyConfig]:
    """Penalty constants, resolving {"power_of_n": x} entries against n."""
    if doc is None:
        return None
    def level(key):
        raw = doc.get(key)
        if raw is None:
            raise ConfigError(f"penalty config is missing '{key}'")
        if isinstance(raw, dict):
            if "power_of_n" not in raw:
                raise ConfigError(f"penalty '{key}' dict must carry 'power_of_n'")
            return float(n) ** float(raw["power_of_n"])
        return float(raw)
    return PenaltyConfig(lambda1=level("lambda1"), lambda2=level("lambda2"),
                         gamma=float(doc.get("gamma", 4.0)), delta=float(doc.get("delta", 0.1)))


@dataclass
class ExperimentConfig:
    """A fully resolved Monte Carlo study."""

    name: str
    system: DiffusionSystem
    fit_models: list
    grid: SamplingGrid
    replications: int
    seed: int
    alpha: float = 0.05
    penalty: Optional[PenaltyConfig] = None
    regime: str = "non-ergodic"
    multistart: int = 0
    doc: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.replications < 1:
            raise ConfigError("an experiment needs at least one replication")
        if not self.fit_models:
            raise ConfigError("an experiment needs at least one fit model")
        if self.regime not in ("non-ergodic", "ergodic"):
            raise ConfigError(f"regime must be 'non-ergodic' or 'ergodic', got '{self.regime}'")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must lie strictly inside (0, 1)")


def parse_experiment_config(doc: dict, *, reps: Optional[int] = None,
                            seed: Optional[int] = None,
                            alpha: Optional[float] = None) -> ExperimentConfig:
    """Resolve an experiment document, with optional CLI overrides."""
    if doc.get("kind") != "experiment":
        raise ConfigError(f"expected an experiment document, got kind '{doc.get('kind')}'")
    for key in ("name", "true_model", "fit_models", "grid"):
        if key not in doc:
            raise ConfigError(f"experiment config is missing '{key}'")
    system, _ = load_system(doc["true_model"])
    models = [load_model_spec(ref)[0] for ref in doc["fit_models"]]
    grid_doc = doc["grid"]
    try:
        grid = SamplingGrid(n=int(grid_doc["n"]), h=float(grid_doc["h"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"experiment grid must define integer n and positive h: {exc}") from exc
    for spec in models:
        if spec.mask.p != system.p:
            raise ConfigError(
                f"fit model '{spec.name}' has dimension {spec.mask.p}, the true system has {system.p}")
    return ExperimentConfig(
        name=str(doc["name"]),
        system=system,
        fit_models=models,
        grid=grid,
        replications=int(reps if reps is not None else doc.get("replications", 1)),
        seed=int(seed if seed is not None else doc.get("seed", 0)),
        alpha=float(alpha if alpha is not None else doc.get("alpha", 0.05)),
        penalty=resolve_penalty(doc.get("penalty"), int(grid_doc["n"])),
        regime=str(doc.get("regime", "non-ergodic")),
        multistart=int(doc.get("multistart", 0)),
        doc=doc,
    )


def load_experiment_config(ref, **overrides) -> ExperimentConfig:
    """Experiment from a fixture name, file path or inline dict."""
    if isinstance(ref, dict):
        return parse_experiment_config(ref, **overrides)
    if isinstance(ref, str):
        if ref.endswith(".json") or os.sep in ref:
            try:
                with open(ref) as fh:
                    doc = json.load(fh)
            except OSError as exc:
                raise ConfigError(f"cannot read experiment file '{ref}': {exc}") from exc
            except json.JSONDecodeError as exc:
                raise ConfigError(f"invalid JSON in '{ref}': {exc}") from exc
        else:
            doc = fixtures.load_experiment(ref)
        return parse_experiment_config(doc, **overrides)
    raise ConfigError(f"expected a name, path or inline document, got {type(ref).__name__}")
