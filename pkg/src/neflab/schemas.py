"""JSON schemas for every CLI output (``neflab --schema`` prints them)."""

from __future__ import annotations

import math

import jsonschema
import numpy as np

from .catalog import DESCRIPTOR_SCHEMA

_NUM = {"type": ["number", "null"]}
_VEC = {"type": "array", "items": _NUM}
_MAT = {"type": "array", "items": _VEC}
_STATUS = {"enum": ["pass", "fail", "n/a", "error"]}
_BETA = {"oneOf": [{"const": "quadratic-mode"}, _VEC]}


_DESCRIPTOR = {k: v for k, v in DESCRIPTOR_SCHEMA.items() if k not in ("$schema", "$defs")}
_DEFS = DESCRIPTOR_SCHEMA.get("$defs", {})


def _obj(props, required=None):
    props = dict(props, seed={"type": "integer"}, command={"type": "string"})
    return {
        "type": "object",
        "properties": props,
        "required": sorted(required if required is not None else props),
        "additionalProperties": False,
    }


_FIT = {
    "type": "object",
    "properties": {
        "property": {"enum": ["P1", "P2", "P3"]},
        "status": _STATUS,
        "a": {"oneOf": [{"type": "null"}, _VEC]},
        "b": _NUM,
        "c": _NUM,
        "residual": _NUM,
        "grid_size": {"type": "integer", "minimum": 0},
        "tol": {"type": "number"},
        "message": {"type": "string"},
    },
    "required": ["property", "status", "a", "b", "c", "residual", "grid_size", "tol", "message"],
    "additionalProperties": False,
}

_ODE_PARAMS = {
    "type": "object",
    "properties": {"beta": {"type": "number"}, "a": {"type": "number"}, "b": {"type": "number"},
                   "lam": {"type": "number"}},
    "required": ["beta", "a", "b", "lam"],
    "additionalProperties": False,
}

_VERDICT = {
    "type": "object",
    "properties": {
        "beta": _BETA,
        "side": {"enum": [1, -1]},
        "P1": _FIT,
        "P2": _FIT,
        "P3": _FIT,
        "agreement": {"type": "boolean"},
        "pass": {"type": "boolean"},
        "ode": _ODE_PARAMS,
    },
    "required": ["beta", "side", "P1", "P2", "P3", "agreement", "pass"],
    "additionalProperties": False,
}

_CLASSIFY_PROPS = {
    "family": {"type": "string"},
    "pass": {"type": "boolean"},
    "agreement": {"type": "boolean"},
    "best_beta": {"oneOf": [{"type": "null"}, _BETA]},
    "attempts": {"type": "array", "items": _VERDICT},
}

_BATTERY_ROW = {
    "type": "object",
    "properties": dict(
        _CLASSIFY_PROPS,
        key={"type": "string"},
        expected={"type": "boolean"},
        matches_expectation={"type": "boolean"},
        note={"type": "string"},
        dimension={"type": "integer"},
    ),
    "additionalProperties": False,
}
_BATTERY_ROW["required"] = sorted(_BATTERY_ROW["properties"])

SCHEMAS = {
    "catalog-list": _obj({"ids": {"type": "array", "items": {"type": "string"}}}),
    "catalog-show": _obj({"descriptor": _DESCRIPTOR}),
    "eval": _obj({
        "family": {"type": "string"},
        "theta": {"type": "array", "items": {
            "type": "object",
            "properties": {"theta": _VEC, "k": _NUM, "grad": _VEC, "hess": _MAT},
            "required": ["theta", "k", "grad", "hess"],
            "additionalProperties": False,
        }},
        "mean": {"type": "array", "items": {
            "type": "object",
            "properties": {"m": _VEC, "V": _MAT, "psi": {"oneOf": [{"type": "null"}, _VEC]}},
            "required": ["m", "V", "psi"],
            "additionalProperties": False,
        }},
    }),
    "transform": _obj({"descriptor": _DESCRIPTOR}),
    "verify": _obj(_CLASSIFY_PROPS),
    "priors": _obj(
        {
            "family": {"type": "string"},
            "family_tag": {"enum": ["PI", "PI_STAR", "PI_TILDE"]},
            "t": {"type": "number"},
            "m0": _VEC,
            "beta": {"oneOf": [{"type": "null"}, _VEC]},
            "side": {"enum": [1, -1]},
            "log_normalizer": _NUM,
            "mass_check": {"oneOf": [{"type": "null"}, {
                "type": "object",
                "properties": {"theta_log_mass": _NUM, "mean_log_mass": _NUM, "difference": _NUM},
                "required": ["theta_log_mass", "mean_log_mass", "difference"],
                "additionalProperties": False,
            }]},
            "omega": {"oneOf": [{"type": "null"}, {
                "type": "object",
                "properties": {
                    "a": _VEC, "b": {"type": "number"}, "in_omega": {"type": "boolean"},
                    "psi_side": {"oneOf": [{"type": "null"}, {"type": "object"}]},
                    "kprime_side": {"oneOf": [{"type": "null"}, {"type": "object"}]},
                },
                "required": ["a", "b", "in_omega", "psi_side", "kprime_side"],
                "additionalProperties": False,
            }]},
            "grid": {"type": "array", "items": {
                "type": "object",
                "properties": {"point": _VEC, "log_density": _NUM},
                "required": ["point", "log_density"],
                "additionalProperties": False,
            }},
        }
    ),
    "ode-solve": _obj({
        "params": _ODE_PARAMS,
        "coeffs": _VEC,
        "is_variance": {"type": "boolean"},
        "ode_residual": {"type": "number"},
    }),
    "ode-match": _obj({"beta": {"type": "number"}, "coeffs": _VEC, "matched": {"type": "boolean"},
                       "params": {"oneOf": [{"type": "null"}, _ODE_PARAMS]}}),
    "ode-integrate": _obj({
        "params": _ODE_PARAMS,
        "m0": {"type": "number"},
        "v0": {"type": "number"},
        "span": {"type": "number"},
        "sup_error": {"type": "number"},
        "trajectory": {"type": "array", "items": {
            "type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3}},
    }),
    "battery": _obj({
        "families": {"type": "array", "items": _BATTERY_ROW},
        "matrix": {"type": "array", "items": {
            "type": "object",
            "properties": {"family": {"type": "string"}, "beta": _BETA, "P1": _STATUS, "P2": _STATUS,
                           "P3": _STATUS, "agreement": {"type": "boolean"}},
            "required": ["family", "beta", "P1", "P2", "P3", "agreement"],
            "additionalProperties": False,
        }},
        "agreement": {"type": "boolean"},
        "all_expected": {"type": "boolean"},
    }),
}

for _s in SCHEMAS.values():
    _s["$schema"] = "https://json-schema.org/draft/2020-12/schema"
    if _DEFS:
        _s["$defs"] = _DEFS


def jsonable(obj):
    """Plain JSON types; non-finite floats become null."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def validate(name, obj):
    jsonschema.Draft202012Validator(SCHEMAS[name]).validate(obj)
