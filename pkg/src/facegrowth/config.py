"""Run configuration: one YAML document, versioned schema, unknown keys rejected.

Example::

    schema_version: 1
    seed: 7
    input:
      source: synth          # or "file" together with path:
      synth: {n_patients: 639, class_signal: 0.5}
    alignment: {mode: joint}
    labels: {balanced: false}
    scenarios: all           # or a list such as ["ceph/12-9/SN-MP"]
    models: all              # or a list such as ["LR", "RF(100)"]
    cv: {folds: 5, repeats: 20}
    training: {patience: 50}
    test: {two_sided: false}
"""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

import yaml

from .cephalometrics import DEFAULT_PANEL
from .data_model import LandmarkSchema, ValidationError
from .evaluation import CvPlan
from .features import Scenario, enumerate_scenarios
from .models import CANONICAL_MODELS, ModelSpec, TrainConfig
from .synthgen import SynthConfig

SCHEMA_VERSION = 1

SMOKE_SCENARIOS = ("ceph/12-9/SN-MP", "proc/9,12/FA", "trans/9/PN-AN")
SMOKE_MODELS = ("LR", "RF(100)", "NN(5)", "MLP(20)")
SMOKE_PATIENTS = 60
SMOKE_REPEATS = 2


class ConfigError(ValidationError):
    pass


DEFAULTS: dict[str, Any] = {
    "schema_version": SCHEMA_VERSION,
    "seed": 0,
    "input": {"source": "synth", "path": None, "synth": {}},
    "landmarks": None,
    "panel": None,
    "alignment": {"mode": "joint", "tol": 1e-10, "max_iter": 100},
    "labels": {"balanced": False},
    "scenarios": "all",
    "models": "all",
    "cv": {"folds": 5, "repeats": 20, "stratified": True},
    "training": {},
    "test": {"two_sided": False},
}

_SECTIONS = {
    "input": {"source", "path", "synth"},
    "alignment": {"mode", "tol", "max_iter"},
    "labels": {"balanced"},
    "cv": {"folds", "repeats", "stratified"},
    "test": {"two_sided"},
}


def _merge(base: dict, over: Mapping, where: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        path = f"{where}{k}"
        if k not in base:
            raise ConfigError(f"unknown config key {path!r}")
        if k in _SECTIONS:
            if not isinstance(v, Mapping):
                raise ConfigError(f"{path!r} must be a mapping")
            unknown = sorted(set(v) - _SECTIONS[k])
            if unknown:
                raise ConfigError(f"unknown config keys in {path!r}: {unknown}")
            out[k] = {**out[k], **v}
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass(frozen=True)
class RunConfig:
    raw: Mapping[str, Any]
    seed: int
    source: str
    path: Path | None
    synth: SynthConfig | None
    schema: LandmarkSchema
    panel_names: tuple[str, ...]
    alignment: Mapping[str, Any]
    balanced: bool
    scenarios: tuple[Scenario, ...]
    models: tuple[str, ...]
    plan: CvPlan
    training: TrainConfig
    two_sided: bool
    smoke: bool = False

    @property
    def digest(self) -> str:
        return config_digest(self.raw)

    def panel(self):
        from .cephalometrics import MeasurementPanel
        by_name = {m.name: m for m in DEFAULT_PANEL}
        return MeasurementPanel(tuple(by_name[n] for n in self.panel_names))


def config_digest(raw: Mapping) -> str:
    text = json.dumps(raw, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(text.encode()).hexdigest()


def load_document(path: str | Path | None) -> dict:
    if path is None:
        return {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a mapping")
    return doc


def resolve(doc: Mapping | None = None, seed: int | None = None, smoke: bool = False,
            base_dir: Path | None = None) -> RunConfig:
    """Validate a config document, apply command-line overrides and build typed settings."""
    doc = dict(doc or {})
    version = doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version!r} (this build reads {SCHEMA_VERSION})")
    raw = _merge(DEFAULTS, doc)
    if seed is not None:
        raw["seed"] = int(seed)
    if smoke:
        raw["input"]["synth"] = {**raw["input"]["synth"], "n_patients": SMOKE_PATIENTS}
        raw["scenarios"] = list(SMOKE_SCENARIOS)
        raw["models"] = list(SMOKE_MODELS)
        raw["cv"]["repeats"] = SMOKE_REPEATS
        raw["smoke"] = True
    if not isinstance(raw["seed"], int) or isinstance(raw["seed"], bool) or raw["seed"] < 0:
        raise ConfigError(f"seed must be a non-negative integer, got {raw['seed']!r}")
    master = raw["seed"]

    inp = raw["input"]
    source = inp["source"]
    path = None
    synth = None
    if source == "synth":
        sd = dict(inp["synth"] or {})
        sd.setdefault("seed", master)
        try:
            synth = SynthConfig.from_dict(sd)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"input.synth: {exc}") from exc
    elif source == "file":
        if not inp["path"]:
            raise ConfigError("input.source is 'file' but input.path is missing")
        path = Path(inp["path"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        if not path.exists():
            raise ConfigError(f"input file {path} does not exist")
    else:
        raise ConfigError(f"input.source must be 'synth' or 'file', got {source!r}")

    schema = LandmarkSchema.default() if raw["landmarks"] is None else LandmarkSchema(tuple(raw["landmarks"]))

    known_panel = [m.name for m in DEFAULT_PANEL]
    panel_names = tuple(known_panel if raw["panel"] is None else raw["panel"])
    bad = [n for n in panel_names if n not in known_panel]
    if bad:
        raise ConfigError(f"unknown measurements in panel: {bad}")

    if raw["alignment"]["mode"] not in ("joint", "per_stage"):
        raise ConfigError(f"alignment.mode must be 'joint' or 'per_stage', got {raw['alignment']['mode']!r}")

    if raw["scenarios"] == "all":
        scenarios = tuple(enumerate_scenarios())
    else:
        try:
            scenarios = tuple(Scenario.parse(s) for s in raw["scenarios"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"scenarios: {exc}") from exc
    if not scenarios:
        raise ConfigError("scenario filter selects nothing")

    if raw["models"] == "all":
        models = CANONICAL_MODELS
    else:
        try:
            models = tuple(ModelSpec.parse(m).name for m in raw["models"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"models: {exc}") from exc
    if not models:
        raise ConfigError("model filter selects nothing")

    cv = raw["cv"]
    try:
        plan = CvPlan(int(cv["folds"]), int(cv["repeats"]), bool(cv["stratified"]), master)
        training = TrainConfig.from_dict(raw["training"] or {})
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc

    raw.setdefault("smoke", False)
    return RunConfig(raw=raw, seed=master, source=source, path=path, synth=synth, schema=schema,
                     panel_names=panel_names, alignment=dict(raw["alignment"]),
                     balanced=bool(raw["labels"]["balanced"]), scenarios=scenarios, models=tuple(models),
                     plan=plan, training=training, two_sided=bool(raw["test"]["two_sided"]),
                     smoke=bool(raw["smoke"]))


def load(path: str | Path | None = None, seed: int | None = None, smoke: bool = False) -> RunConfig:
    base = Path(path).parent if path else None
    return resolve(load_document(path), seed=seed, smoke=smoke, base_dir=base)
