"""JSON run configuration: schema, preset lookup and conversion to library objects.

A configuration looks like::

    {
      "name": "table1a",
      "mesh": {"family": "uniform", "xmin": 0, "xmax": 15, "I": 60, "levels": 3},
      "kernel": "sum:1",
      "ic": "normal:1,0.01",
      "time": {"t_end": 0.5, "dt": 0.001},
      "study": {"mode": "self"},
      "output": {"dir": "out/table1a"}
    }

``mesh.I`` is the number of cells of the coarsest study level (and the mesh
used by ``simulate``); studies run ``I * 2**l`` for ``l = 0..levels``.
Refined families (locally_uniform, oscillatory, random) split a base grid of
``base_cells`` cells, so ``I`` must be ``base_cells`` times a power of two.
"""

from __future__ import annotations

import copy
import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema

from .convergence import StudyConfig
from .errors import ConfigError, InvalidArgument
from .grid import MeshFamily
from .initial_condition import DensityKind, DensitySpec, parse_density
from .integrator import IntegrationConfig
from .kernel import KernelSpec, parse_kernel

_NUMBER = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["mesh", "kernel", "ic"],
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "mesh": {
            "type": "object",
            "additionalProperties": False,
            "required": ["family", "xmin", "xmax", "I"],
            "properties": {
                "family": {"enum": [f.value for f in MeshFamily]},
                "xmin": {"type": "number", "minimum": 0},
                "xmax": _POS,
                "I": {"type": "integer", "minimum": 1},
                "levels": {"type": "integer", "minimum": 0},
                "base_cells": {"type": "integer", "minimum": 1},
                "base_family": {"enum": ["uniform", "geometric"]},
                "seeds": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
                "split_range": {"type": "array", "items": _NUMBER, "minItems": 2, "maxItems": 2},
            },
        },
        "kernel": {
            "oneOf": [
                {"type": "string"},
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["kind"],
                    "properties": {"kind": {"enum": ["constant", "sum", "product"]}, "k0": _POS},
                },
            ]
        },
        "ic": {
            "oneOf": [
                {"type": "string"},
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["kind"],
                    "properties": {
                        "kind": {"enum": ["normal", "exponential"]},
                        "mu": _NUMBER,
                        "sigma2": _POS,
                        "alpha": _POS,
                    },
                },
            ]
        },
        "time": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "t_end": {"type": "number", "minimum": 0},
                "dt": _POS,
                "monitor_interval": {"type": "integer", "minimum": 1},
                "negativity_policy": {"enum": ["warn", "abort"]},
                "snapshots": {"type": "array", "items": {"type": "number", "minimum": 0}},
            },
        },
        "study": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "mode": {"enum": ["self", "reference"]},
                "relative": {"type": "boolean"},
                "reference": {"enum": ["exact", "fine"]},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"dir": {"type": "string"}},
        },
    },
}


def preset_names() -> list:
    root = resources.files("pivotlab") / "presets"
    names = [p.name[:-5] for p in root.iterdir() if p.name.endswith(".json")]
    return sorted(names, key=lambda n: [int(t) if t.isdigit() else t for t in re.split(r"(\d+)", n)])


def _read_source(source) -> tuple:
    """Return ``(text, origin)`` for a file path or a preset name."""
    path = Path(source)
    if path.is_file():
        return path.read_text(), str(path)
    name = str(source)
    if name.endswith(".json"):
        name = name[:-5]
    preset = resources.files("pivotlab") / "presets" / f"{name}.json"
    if "/" not in name and preset.is_file():
        return preset.read_text(), f"preset:{name}"
    raise ConfigError(f"config {source!r} is neither a file nor a preset "
                      f"(presets: {', '.join(preset_names())})")


def load_raw(source) -> dict:
    text, origin = _read_source(source)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{origin}: invalid JSON ({exc})") from None
    validate(data, origin)
    return data


def validate(data: dict, origin: str = "config") -> None:
    try:
        jsonschema.validate(data, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{origin}: {where}: {exc.message}") from None


def _kernel(value) -> KernelSpec:
    if isinstance(value, str):
        return parse_kernel(value)
    return KernelSpec(value["kind"], value.get("k0", 1.0))


def _density(value) -> DensitySpec:
    if isinstance(value, str):
        return parse_density(value)
    kind = value["kind"]
    if kind == "normal":
        return DensitySpec(DensityKind.NORMAL, mu=value.get("mu", 0.0), sigma2=value.get("sigma2", 1.0))
    return DensitySpec(DensityKind.EXPONENTIAL, alpha=value.get("alpha", 1.0))


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration converted to library objects."""

    raw: dict
    study: StudyConfig
    integration: IntegrationConfig
    snapshots: tuple
    output_dir: str | None

    @property
    def name(self) -> str:
        return self.raw.get("name", "run")


def resolve(data: dict, seed_override: int | None = None) -> RunConfig:
    """Build a ``RunConfig``; any inconsistency is reported as ``ConfigError``."""
    data = copy.deepcopy(data)
    validate(data)
    mesh = data["mesh"]
    if seed_override is not None:
        mesh["seeds"] = [int(seed_override)]
    tcfg = data.get("time", {})
    scfg = data.get("study", {})
    family = MeshFamily.parse(mesh["family"])
    if mesh["xmax"] <= mesh["xmin"]:
        raise ConfigError("mesh.xmax must exceed mesh.xmin")
    if family is MeshFamily.GEOMETRIC or mesh.get("base_family") == "geometric":
        if mesh["xmin"] <= 0:
            raise ConfigError("geometric meshes need xmin > 0")
    try:
        kwargs = dict(
            family=family,
            x_min=float(mesh["xmin"]),
            x_max=float(mesh["xmax"]),
            kernel=_kernel(data["kernel"]),
            density=_density(data["ic"]),
            gp0=int(mesh["I"]),
            levels=int(mesh.get("levels", 1 if scfg.get("mode", "self") == "reference" else 2)),
            base_cells=int(mesh.get("base_cells", 30)),
            seeds=tuple(mesh.get("seeds", [0])),
            t_end=float(tcfg.get("t_end", 0.5)),
            dt=float(tcfg.get("dt", 1e-3)),
            mode=scfg.get("mode", "self"),
            relative=scfg.get("relative"),
            reference=scfg.get("reference", "exact"),
        )
        if "base_family" in mesh:
            kwargs["base_family"] = mesh["base_family"]
        if "split_range" in mesh:
            lo, hi = mesh["split_range"]
            if not 0 < lo <= hi < 1:
                raise ConfigError("mesh.split_range must satisfy 0 < lo <= hi < 1")
            kwargs["split_range"] = (float(lo), float(hi))
        study = StudyConfig(**kwargs)
        integration = IntegrationConfig(
            t_end=study.t_end, dt=study.dt,
            monitor_interval=int(tcfg.get("monitor_interval", 10)),
            negativity_policy=tcfg.get("negativity_policy", "warn"),
        )
    except InvalidArgument as exc:
        raise ConfigError(str(exc)) from None
    snaps = sorted(set(float(s) for s in tcfg.get("snapshots", [integration.t_end])))
    if any(s > integration.t_end for s in snaps):
        raise ConfigError("snapshot times must not exceed time.t_end")
    return RunConfig(data, study, integration, tuple(snaps), data.get("output", {}).get("dir"))


def load(source, seed_override: int | None = None) -> RunConfig:
    return resolve(load_raw(source), seed_override)
