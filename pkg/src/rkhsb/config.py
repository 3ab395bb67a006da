"""Experiment configuration: a JSON file validated against a schema, plus flag overrides."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import jsonschema

from .errors import ConfigError, InputError
from .systems import system_from_config

_NUM_OR_LIST = {"oneOf": [
    {"type": "number", "exclusiveMinimum": 0},
    {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
]}

_KERNEL = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "lengthscale": {"oneOf": [
            {"type": "number", "exclusiveMinimum": 0},
            {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
        ]},
        "signal": {"type": "number", "exclusiveMinimum": 0},
        "squared_distance": {"type": "boolean"},
        "dkl": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "hidden": {"type": "array", "items": {"type": "integer", "minimum": 1}},
                "activation": {"enum": ["gelu", "tanh"]},
                "epochs": {"type": "integer", "minimum": 0},
                "train_size": {"type": "integer", "minimum": 1},
                "step_size": {"type": "number", "exclusiveMinimum": 0},
                "batch_fraction": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            },
        },
    },
}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "system": {"oneOf": [
            {"type": "string"},
            {
                "type": "object",
                "additionalProperties": False,
                "properties": {
                    "name": {"type": "string"},
                    "matrix": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
                    "expression": {"type": "string"},
                    "domain": {"type": "array", "items": {
                        "type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}},
                    "B": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
                    "noise": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["support"],
                        "properties": {
                            "kind": {"enum": ["uniform", "pert"]},
                            "support": {"oneOf": [
                                {"type": "number", "minimum": 0},
                                {"type": "array", "items": {"type": "number", "minimum": 0}},
                            ]},
                        },
                    },
                    "description": {"type": "string"},
                },
            },
        ]},
        "dataset": {"type": "string"},
        "sigma_v": {"type": "number", "minimum": 0},
        "m": {"type": "integer", "minimum": 1},
        "kernel": {"oneOf": [_KERNEL, {"type": "array", "items": _KERNEL, "minItems": 1}]},
        "sigma_n": _NUM_OR_LIST,
        "sigma_n_ratio": _NUM_OR_LIST,
        "B": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
        "deltas": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                   "minItems": 1},
        "seeds": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
        "out": {"type": "string"},
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "grid": {"type": "integer", "minimum": 2},
                "output": {"type": "integer", "minimum": 0},
                "axis": {"type": "integer", "minimum": 0},
            },
        },
        "bench": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "test_points": {"type": "integer", "minimum": 1},
                "m_values": {"type": "array", "items": {"type": "integer", "minimum": 1}},
            },
        },
        "barrier": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "cells": {"oneOf": [
                    {"type": "integer", "minimum": 1},
                    {"type": "array", "items": {"type": "integer", "minimum": 1}},
                ]},
                "initial": {"type": "array", "items": {
                    "type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}},
                "horizons": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
                "kinds": {"type": "array", "items": {"enum": ["prob", "det", "hashimoto"]}, "minItems": 1},
                "grid_per_dim": {"type": "integer", "minimum": 2},
                "slack": {"type": "number", "minimum": 0},
                "simulate": {"type": "integer", "minimum": 0},
            },
        },
        "coverage": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "trials": {"type": "integer"},
                "queries": {"type": "integer"},
                "output": {"type": "integer", "minimum": 0},
            },
        },
    },
    "anyOf": [{"required": ["system"]}, {"required": ["dataset"]}],
}

DEFAULT_KERNEL = {"lengthscale": 1.0, "signal": 1.0}


def _as_list(v):
    return None if v is None else (list(v) if isinstance(v, (list, tuple)) else [v])


@dataclass(frozen=True)
class RunConfig:
    """Validated run settings. ``sigma_n`` and ``sigma_n_ratio`` are lists (one row each)."""

    system: object = None
    dataset: Path | None = None
    sigma_v: float | None = None
    m: int = 20
    kernels: tuple = (DEFAULT_KERNEL,)
    sigma_n: tuple | None = None
    sigma_n_ratio: tuple | None = None
    B: tuple | None = None
    deltas: tuple = (0.05,)
    seeds: tuple = (0,)
    out: Path = Path("out")
    sections: dict = field(default_factory=dict)
    source: str = "<config>"

    def section(self, name):
        return dict(self.sections.get(name) or {})

    def noise_level(self, output=0):
        """Noise support of output ``output``."""
        if self.sigma_v is not None:
            return float(self.sigma_v)
        if self.system is None:
            raise ConfigError(f"{self.source}: 'sigma_v' is required with a dataset and no system")
        return self.system.noise.for_dim(output)

    def norm_bound(self, output=0):
        if self.B is not None:
            return float(self.B[output] if len(self.B) > 1 else self.B[0])
        if self.system is None:
            raise ConfigError(f"{self.source}: 'B' is required with a dataset and no system")
        return float(self.system.B[output])

    def sigma_n_values(self, output=0):
        """Resolved noise levels for the GP, as ``(label, value)`` pairs."""
        sv = self.noise_level(output)
        if self.sigma_n is not None:
            pairs = [(f"{s:g}", float(s)) for s in self.sigma_n]
        else:
            ratios = self.sigma_n_ratio if self.sigma_n_ratio is not None else (0.2,)
            pairs = [(f"sigma_v*{r:g}", float(r) * sv) for r in ratios]
        for label, s in pairs:
            if not s > 0:
                raise ConfigError(f"{self.source}: sigma_n resolves to {s} ({label}); it must be > 0. "
                                  "With sigma_v = 0 give an absolute 'sigma_n'.")
        return pairs

    def with_overrides(self, seed=None, sigma_n_ratio=None, delta=None, out=None):
        """Flags win over file values."""
        cfg = self
        if seed is not None:
            cfg = replace(cfg, seeds=(int(seed),))
        if sigma_n_ratio is not None:
            if not sigma_n_ratio > 0:
                raise ConfigError(f"--sigma-n-ratio must be > 0, got {sigma_n_ratio}")
            cfg = replace(cfg, sigma_n_ratio=(float(sigma_n_ratio),), sigma_n=None)
        if delta is not None:
            if not 0 < delta <= 1:
                raise ConfigError(f"--delta must be in (0, 1], got {delta}")
            cfg = replace(cfg, deltas=(float(delta),))
        if out is not None:
            cfg = replace(cfg, out=Path(out))
        return cfg


def _line_of(text, path):
    """Best-effort line number of the JSON value at ``path`` (keys and indices)."""
    pos = 0
    for part in path:
        if isinstance(part, str):
            hit = re.compile(r'"%s"\s*:' % re.escape(part)).search(text, pos)
            if hit is None:
                break
            pos = hit.start()
    return text.count("\n", 0, pos) + 1


def parse_config(text, source="<config>", base_dir=None):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}: invalid JSON: {exc.msg}") from None
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        lines = []
        for err in errors:
            where = "/".join(str(p) for p in err.absolute_path) or "<root>"
            lines.append(f"{source}:{_line_of(text, err.absolute_path)}: {where}: {err.message}")
        raise ConfigError("\n".join(lines))

    base_dir = Path(base_dir) if base_dir is not None else Path.cwd()
    try:
        system = system_from_config(doc["system"]) if "system" in doc else None
    except InputError as exc:
        raise ConfigError(f"{source}:{_line_of(text, ['system'])}: {exc}") from None
    dataset = None
    if "dataset" in doc:
        dataset = (base_dir / doc["dataset"]).resolve()
        if not dataset.is_file():
            raise ConfigError(f"{source}:{_line_of(text, ['dataset'])}: dataset {dataset} does not exist")
    kernels = doc.get("kernel", DEFAULT_KERNEL)
    kernels = tuple(kernels) if isinstance(kernels, list) else (kernels,)
    if system is not None and "B" in doc and len(doc["B"]) not in (1, system.n_outputs):
        raise ConfigError(f"{source}:{_line_of(text, ['B'])}: {len(doc['B'])} norm bounds for "
                          f"{system.n_outputs} outputs")
    return RunConfig(
        system=system,
        dataset=dataset,
        sigma_v=doc.get("sigma_v"),
        m=doc.get("m", 20),
        kernels=kernels,
        sigma_n=tuple(_as_list(doc["sigma_n"])) if "sigma_n" in doc else None,
        sigma_n_ratio=tuple(_as_list(doc["sigma_n_ratio"])) if "sigma_n_ratio" in doc else None,
        B=tuple(doc["B"]) if "B" in doc else None,
        deltas=tuple(doc.get("deltas", (0.05,))),
        seeds=tuple(doc.get("seeds", (0,))),
        out=Path(doc.get("out", "out")),
        sections={k: doc[k] for k in ("sweep", "bench", "barrier", "coverage") if k in doc},
        source=source,
    )


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, str(path), path.parent)
