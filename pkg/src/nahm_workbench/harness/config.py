"""Experiment configuration: schema validation and content hashing."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema

SCHEMA = {
    "type": "object",
    "required": ["experiment"],
    "additionalProperties": False,
    "properties": {
        "experiment": {"type": "string", "minLength": 1},
        "params": {"type": "object"},
        "tolerances": {
            "type": "object",
            "additionalProperties": {"type": "number", "exclusiveMinimum": 0},
        },
        "seed": {"type": "integer", "minimum": 0},
        "workers": {"type": "integer", "minimum": 1},
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"dir": {"type": "string"}, "prefix": {"type": "string"}},
        },
    },
}


class ConfigError(ValueError):
    """Schema or semantic problem in an experiment config."""


def canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


def content_hash(obj) -> str:
    """Git blob hash of the canonical JSON encoding."""
    data = canonical_json(obj)
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    params: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    seed: int | None = None
    workers: int = 1
    output_dir: str | None = None
    prefix: str | None = None
    raw: dict = field(default_factory=dict)

    @property
    def hash(self) -> str:
        return content_hash(self.raw)

    def with_overrides(self, seed=None, workers=None, output_dir=None) -> "ExperimentConfig":
        raw = json.loads(json.dumps(self.raw))
        if seed is not None:
            raw["seed"] = int(seed)
        if workers is not None:
            raw["workers"] = int(workers)
        if output_dir is not None:
            raw.setdefault("output", {})["dir"] = str(output_dir)
        return parse_config(raw)


def parse_config(raw: dict) -> ExperimentConfig:
    from .experiments import REGISTRY

    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"schema error at {where}: {exc.message}") from None
    exp = raw["experiment"]
    if exp not in REGISTRY:
        raise ConfigError(f"unknown experiment {exp!r}; known: {', '.join(sorted(REGISTRY))}")
    spec = REGISTRY[exp]
    if spec.randomized and "seed" not in raw:
        raise ConfigError(f"experiment {exp!r} is randomized and needs a seed")
    unknown = set(raw.get("tolerances", {})) - set(spec.tolerances)
    if unknown:
        raise ConfigError(f"unknown tolerances for {exp!r}: {sorted(unknown)}")
    out = raw.get("output", {})
    return ExperimentConfig(
        experiment=exp,
        params=dict(raw.get("params", {})),
        tolerances={**spec.tolerances, **raw.get("tolerances", {})},
        seed=raw.get("seed"),
        workers=raw.get("workers", 1),
        output_dir=out.get("dir"),
        prefix=out.get("prefix"),
        raw=raw,
    )


def bundled_config_dir() -> Path:
    return Path(str(resources.files("nahm_workbench.harness") / "configs"))


def resolve_config_path(path) -> Path:
    """A path on disk, or the name of a bundled config (with or without ``.json``)."""
    p = Path(path)
    if p.exists():
        return p
    name = p.name if p.suffix == ".json" else p.name + ".json"
    bundled = bundled_config_dir() / name
    if bundled.exists():
        return bundled
    raise FileNotFoundError(f"config not found: {path}")


def load_config(path) -> ExperimentConfig:
    p = resolve_config_path(path)
    try:
        raw = json.loads(Path(p).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{p}: top level must be an object")
    return parse_config(raw)
