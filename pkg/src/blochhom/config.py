"""Experiment configuration: JSON schema, loading and validation."""
from __future__ import annotations

import copy
import json
from pathlib import Path

import jsonschema

from .errors import ConfigInvalid

CONFIG_VERSION = 1
SCENARIOS = ("bands", "cell", "tensor", "derivs", "sweep-rho", "supercell", "transform-limit", "verify-all")

_number_list = {"type": "array", "items": {"type": "number"}, "minItems": 1}
_trig_term = {
    "type": "object",
    "properties": {"c": {"type": "number"}, "f": {"type": "array", "items": {"type": "string"}}},
    "required": ["c"],
    "additionalProperties": False,
}
_regime = {"type": "string", "enum": ["zero", "theta", "infinity"]}

COEFFICIENT_SCHEMA = {
    "type": "object",
    "properties": {
        "version": {"type": "integer", "minimum": 1},
        "dim": {"type": "integer", "minimum": 1},
        "kind": {"type": "string", "enum": ["constant", "trig", "laminate", "samples"]},
        "payload": {"type": "object"},
        "n_per_axis": {"type": "integer", "minimum": 3},
    },
    "required": ["dim", "kind"],
    "additionalProperties": False,
}

SCENARIO_PARAMS = {
    "bands": {
        "rho": {"type": "number", "minimum": 0},
        "etas": {"type": "array", "items": _number_list},
        "n_eta": {"type": "integer", "minimum": 1},
        "modes": {"type": "integer", "minimum": 1},
    },
    "cell": {"rho": {"type": "number", "minimum": 0}},
    "tensor": {
        "rhos": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
        "routes": {"type": "array", "items": {"type": "string", "enum": ["cell", "hessian", "derivs"]}},
    },
    "derivs": {
        "rho": {"type": "number", "minimum": 0},
        "max_order": {"type": "integer", "minimum": 0, "maximum": 4},
    },
    "sweep-rho": {
        "rhos": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 2},
        "derivatives": {"type": "boolean"},
    },
    "supercell": {
        "epsilon": {"type": "number", "exclusiveMinimum": 0},
        "M": {"type": "integer", "minimum": 1},
        "rho": {"type": "number", "minimum": 0},
        "eps_list": _number_list,
        "regimes": {"type": "array", "items": _regime},
        "theta": {"type": "number", "exclusiveMinimum": 0},
        "forcing": {"type": "array", "items": _trig_term, "minItems": 1},
    },
    "transform-limit": {
        "eps_list": _number_list,
        "regimes": {"type": "array", "items": _regime},
        "theta": {"type": "number", "exclusiveMinimum": 0},
        "radius": {"type": "number", "exclusiveMinimum": 0},
        "width": {"type": "number", "exclusiveMinimum": 0},
        "window": {"type": "number", "exclusiveMinimum": 0},
    },
    "verify-all": {
        "rhos": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
        "garding_trials": {"type": "integer", "minimum": 1},
        "supercell_N": {"type": "integer", "minimum": 1},
        "eps_list": _number_list,
        "n_eta": {"type": "integer", "minimum": 2},
    },
}

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "version": {"type": "integer", "const": CONFIG_VERSION},
        "scenario": {"type": "string", "enum": list(SCENARIOS)},
        "coefficient": COEFFICIENT_SCHEMA,
        "numerics": {
            "type": "object",
            "properties": {
                "N": {"type": "integer", "minimum": 1},
                "n_per_axis": {"type": "integer", "minimum": 3},
                "fd_step": {"type": "number", "exclusiveMinimum": 0},
                "tolerances": {"type": "object", "additionalProperties": {"type": "number", "minimum": 0}},
            },
            "required": ["N"],
            "additionalProperties": False,
        },
        "scenario_params": {"type": "object"},
        "output_dir": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
    },
    "required": ["version", "coefficient", "numerics"],
    "additionalProperties": False,
}


def _validate(instance, schema, where: str) -> None:
    try:
        jsonschema.validate(instance, schema)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path)
        raise ConfigInvalid(f"{where}{'/' + path if path else ''}: {exc.message}") from None


def validate_config(cfg: dict, scenario: str | None = None) -> dict:
    """Validate and normalize a configuration; the command-line scenario wins if the file has none."""
    _validate(cfg, CONFIG_SCHEMA, "config")
    cfg = copy.deepcopy(cfg)
    declared = cfg.get("scenario")
    if scenario is not None and declared is not None and scenario != declared:
        raise ConfigInvalid(f"config declares scenario {declared!r}, command asked for {scenario!r}")
    cfg["scenario"] = scenario or declared
    if cfg["scenario"] not in SCENARIOS:
        raise ConfigInvalid("no scenario given")
    params_schema = {"type": "object", "properties": SCENARIO_PARAMS[cfg["scenario"]],
                     "additionalProperties": False}
    cfg.setdefault("scenario_params", {})
    _validate(cfg["scenario_params"], params_schema, "scenario_params")
    n = cfg["numerics"].get("n_per_axis", cfg["coefficient"].get("n_per_axis"))
    if n is not None and n % 2 == 0:
        raise ConfigInvalid("n_per_axis must be odd")
    cfg.setdefault("seed", 0)
    return cfg


def load_config(path, scenario: str | None = None) -> dict:
    path = Path(path)
    try:
        cfg = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigInvalid(f"cannot read config {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigInvalid("config must be a JSON object")
    cfg = validate_config(cfg, scenario)
    payload = cfg["coefficient"].get("payload", {})
    if cfg["coefficient"]["kind"] == "samples" and "path" in payload:
        payload["path"] = str((path.parent / payload["path"]).resolve())
    return cfg
