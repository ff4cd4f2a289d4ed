"""Run configuration: a JSON document checked against a strict schema.

Example::

    {
      "solver": "kinetic",
      "grid": {"dim": 1, "extent": 3.0, "cells": 128},
      "velocity": {"vmax": 1.0, "nodes_per_axis": 16},
      "species": [
        {"psi": 1.0, "theta": {"kind": "tanh", "amp": 0.5, "sigma": 1.0}},
        {"psi": 2.0, "theta": {"kind": "tanh", "amp": 0.5, "sigma": 1.0}}
      ],
      "delta": 0,
      "eps": 0.25,
      "dt": 0.001,
      "t_end": 1.0,
      "init": {"kind": "gaussian-bump",
               "species": [{"center": 1.5, "width": 0.25, "mass": 1.0},
                           {"center": 1.8, "width": 0.2, "mass": 0.5}]},
      "output": {"directory": "out", "snapshot_stride": 10}
    }

Only ``solver``, ``grid``, ``dt`` and ``t_end`` are always required;
``eps`` is required for the kinetic solver.  See :data:`SCHEMA` for every key
and default.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from chemokin.geometry import SpatialGrid, VelocitySet, build_velocity_set
from chemokin.tumbling import ResponseFunction, SpeciesParams

DEFAULT_EPS_LIST = (0.5, 0.25, 0.125, 0.0625)
DEFAULT_KERNEL_MATRIX = {"dims": [1, 2], "p": [1.0, 1.5, 2.0], "t": [0.1, 1.0, 10.0]}

_positive = {"type": "number", "exclusiveMinimum": 0}
_per_axis = {"oneOf": [_positive, {"type": "array", "items": _positive, "minItems": 1, "maxItems": 2}]}
_cells = {"oneOf": [{"type": "integer", "minimum": 4},
                    {"type": "array", "items": {"type": "integer", "minimum": 4}, "minItems": 1, "maxItems": 2}]}
_point = {"oneOf": [{"type": "number"}, {"type": "array", "items": {"type": "number"}, "minItems": 1, "maxItems": 2}]}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["solver", "grid", "dt", "t_end"],
    "properties": {
        "solver": {"enum": ["kinetic", "macro", "sweep", "kernels"]},
        "scheme": {"enum": ["implicit", "splitting"], "default": "implicit"},
        "grid": {
            "type": "object", "additionalProperties": False, "required": ["dim", "extent", "cells"],
            "properties": {"dim": {"enum": [1, 2]}, "extent": _per_axis, "cells": _cells},
        },
        "velocity": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "vmax": {**_positive, "default": 1.0},
                "nodes_per_axis": {"type": "integer", "minimum": 2, "multipleOf": 2, "default": 16},
            },
        },
        "species": {
            "type": "array", "minItems": 2, "maxItems": 2,
            "items": {
                "type": "object", "additionalProperties": False,
                "properties": {
                    "psi": {**_positive, "default": 1.0},
                    "theta": {
                        "type": "object", "additionalProperties": False,
                        "properties": {
                            "kind": {"enum": ["tanh", "clamped-linear"], "default": "tanh"},
                            "amp": {"type": "number", "minimum": 0, "exclusiveMaximum": 1, "default": 0.5},
                            "sigma": {**_positive, "default": 1.0},
                        },
                    },
                },
            },
        },
        "delta": {"enum": [0, 1], "default": 0},
        "eps": {"type": "number", "minimum": 0, "maximum": 1},
        "eps_list": {"type": "array", "minItems": 1,
                     "items": {"type": "number", "exclusiveMinimum": 0, "maximum": 1}},
        "dt": _positive,
        "t_end": _positive,
        "init": {
            "oneOf": [
                {"type": "object", "additionalProperties": False, "required": ["kind", "species"],
                 "properties": {
                     "kind": {"const": "gaussian-bump"},
                     "species": {"type": "array", "minItems": 2, "maxItems": 2, "items": {
                         "type": "object", "additionalProperties": False,
                         "required": ["center", "width", "mass"],
                         "properties": {"center": _point, "width": _positive,
                                        "mass": {"type": "number", "minimum": 0}}}}}},
                {"type": "object", "additionalProperties": False, "required": ["kind", "level"],
                 "properties": {"kind": {"const": "uniform"},
                                "level": {"oneOf": [{"type": "number", "minimum": 0},
                                                    {"type": "array", "minItems": 2, "maxItems": 2,
                                                     "items": {"type": "number", "minimum": 0}}]}}},
                {"type": "object", "additionalProperties": False, "required": ["kind", "path"],
                 "properties": {"kind": {"const": "file"}, "path": {"type": "string", "minLength": 1}}},
            ],
        },
        "output": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "directory": {"type": "string", "minLength": 1, "default": "out"},
                "snapshot_stride": {"type": "integer", "minimum": 1, "default": 10},
                "sample_every": {"type": "integer", "minimum": 1, "default": 1},
                "figures": {"type": "boolean", "default": True},
            },
        },
        "kernels": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "dims": {"type": "array", "minItems": 1, "items": {"enum": [1, 2]}},
                "p": {"type": "array", "minItems": 1, "items": {"type": "number", "minimum": 1}},
                "t": {"type": "array", "minItems": 1, "items": _positive},
            },
        },
    },
}


class ConfigError(ValueError):
    """Invalid configuration; ``pointer`` is a JSON pointer to the offending key."""

    def __init__(self, pointer: str, message: str):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer
        self.message = message


@dataclass(frozen=True)
class RunConfig:
    solver: str
    grid: SpatialGrid
    velocities: VelocitySet
    species: tuple[SpeciesParams, SpeciesParams]
    delta: int
    eps: float | None
    eps_list: tuple[float, ...]
    dt: float
    t_end: float
    scheme: str
    init: dict
    output_dir: Path
    snapshot_stride: int
    sample_every: int
    figures: bool
    kernels: dict = field(default_factory=lambda: dict(DEFAULT_KERNEL_MATRIX))
    base_dir: Path = Path(".")


def _pointer(path) -> str:
    return "".join(f"/{p}" for p in path)


def _schema_error(doc) -> ConfigError | None:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: (list(map(str, e.absolute_path)), e.validator))
    if not errors:
        return None
    # amplitude bound gets a dedicated message
    for err in errors:
        path = list(err.absolute_path)
        if path[-1:] == ["amp"] and err.validator == "exclusiveMaximum":
            return ConfigError(_pointer(path), f"response amplitude must satisfy ||theta||_inf < 1 "
                                               f"(amp < 1) for positive tumbling rates; got amp={err.instance}")
    err = jsonschema.exceptions.best_match(errors)
    return ConfigError(_pointer(err.absolute_path), err.message)


def _axes(value, dim: int, name: str, pointer: str):
    values = [value] * dim if np.isscalar(value) else list(value)
    if len(values) != dim:
        raise ConfigError(pointer, f"{name} needs {dim} entries, got {len(values)}")
    return tuple(values)


def parse_config(text: str, base_dir=".") -> RunConfig:
    """Validate a JSON document and build a :class:`RunConfig`.

    Relative paths (output directory, init file) resolve against ``base_dir``.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"invalid JSON: {exc}") from None
    err = _schema_error(doc)
    if err:
        raise err
    base_dir = Path(base_dir)

    g = doc["grid"]
    dim = g["dim"]
    grid = SpatialGrid(dim, _axes(g["extent"], dim, "extent", "/grid/extent"),
                       _axes(g["cells"], dim, "cells", "/grid/cells"))
    v = doc.get("velocity", {})
    vs = build_velocity_set(dim, v.get("vmax", 1.0), v.get("nodes_per_axis", 16))

    species = []
    for s in doc.get("species", [{}, {}]):
        th = s.get("theta", {})
        theta = ResponseFunction(th.get("kind", "tanh"), th.get("amp", 0.5), th.get("sigma", 1.0))
        species.append(SpeciesParams(s.get("psi", 1.0), theta))

    solver = doc["solver"]
    eps = doc.get("eps")
    if solver == "kinetic":
        if eps is None:
            raise ConfigError("/eps", "eps is required for solver=kinetic")
        if eps == 0:
            raise ConfigError("/eps", "eps must lie in (0, 1] for the kinetic model; "
                                      "use solver=macro for the eps -> 0 limit")
    eps_list = tuple(doc.get("eps_list", DEFAULT_EPS_LIST))
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ConfigError("/eps_list", f"eps_list must be strictly decreasing, got {list(eps_list)}")
    if doc["dt"] > doc["t_end"]:
        raise ConfigError("/dt", f"dt={doc['dt']} exceeds t_end={doc['t_end']}")

    init = doc.get("init", {"kind": "uniform", "level": 1.0})
    if init["kind"] == "gaussian-bump":
        for j, b in enumerate(init["species"]):
            _axes(b["center"], dim, "center", f"/init/species/{j}/center")
    if init["kind"] == "file":
        init = {**init, "path": str(base_dir / init["path"])}

    out = doc.get("output", {})
    kernels = {**DEFAULT_KERNEL_MATRIX, **doc.get("kernels", {})}
    return RunConfig(
        solver=solver, grid=grid, velocities=vs, species=tuple(species), delta=doc.get("delta", 0),
        eps=eps, eps_list=eps_list, dt=float(doc["dt"]), t_end=float(doc["t_end"]),
        scheme=doc.get("scheme", "implicit"), init=init,
        output_dir=base_dir / out.get("directory", "out"),
        snapshot_stride=out.get("snapshot_stride", 10), sample_every=out.get("sample_every", 1),
        figures=out.get("figures", True), kernels=kernels, base_dir=base_dir,
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError("", f"cannot read {path}: {exc}") from None
    return parse_config(text, base_dir=path.parent)
