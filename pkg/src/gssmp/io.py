"""JSON schemas and loaders for models, dislocation measures and process specs.

Every document may carry a top-level ``"spec_version"``; when present it must
equal :data:`SPEC_VERSION`.
"""
import json

import jsonschema
import numpy as np

SPEC_VERSION = "1.0"


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


_num = {"type": "number"}
_vec = {"type": "array", "items": _num, "minItems": 1, "maxItems": 2}
_version = {"const": SPEC_VERSION}

JUMP_SCHEMA = {
    "type": "object",
    "required": ["rate", "displacement"],
    "properties": {
        "rate": {"type": "number", "exclusiveMinimum": 0},
        "displacement": {"oneOf": [_num, _vec]},
        "kill_prob": {"type": "number", "minimum": 0, "maximum": 1},
    },
    "additionalProperties": False,
}

MODEL_SCHEMA = {
    "type": "object",
    "required": ["dim"],
    "properties": {
        "spec_version": _version,
        "dim": {"enum": [1, 2]},
        "drift": {"oneOf": [_num, _vec]},
        "diffusion": {"oneOf": [_num, {"type": "array"}]},
        "jumps": {"type": "array", "items": JUMP_SCHEMA},
        "base_kill_rate": {"type": "number", "minimum": 0},
        "grid_step": {"type": "number", "exclusiveMinimum": 0},
    },
    "additionalProperties": False,
}

NU_SCHEMA = {
    "type": "object",
    "required": ["atoms"],
    "properties": {
        "spec_version": _version,
        "atoms": {
            "type": "array", "minItems": 1,
            "items": {
                "type": "object",
                "required": ["masses", "weight"],
                "properties": {
                    "masses": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1},
                               "minItems": 1},
                    "weight": {"type": "number", "exclusiveMinimum": 0},
                },
                "additionalProperties": False,
            },
        },
        "erosion": {"type": "number", "minimum": 0},
        "alpha": _num,
    },
    "additionalProperties": False,
}

PSI_SCHEMA = {
    "type": "object",
    "required": ["name"],
    "properties": {"name": {"type": "string"}, "params": {"type": "object"}},
    "additionalProperties": False,
}

LAMPERTI_SCHEMA = {
    "type": "object",
    "required": ["psi", "driver", "alpha"],
    "properties": {
        "spec_version": _version,
        "psi": PSI_SCHEMA,
        "driver": MODEL_SCHEMA,
        "alpha": _num,
        "beta": _num,
        "start": {"oneOf": [_num, _vec]},
    },
    "additionalProperties": False,
}

COMPONENT_SCHEMA = {
    "type": "object",
    "required": ["component"],
    "properties": {
        "spec_version": _version,
        "component": {"type": "string"},
        "params": {"type": "object"},
    },
    "additionalProperties": False,
}


def validate(doc, schema, what="config"):
    """Validate ``doc``; raise ``ConfigError`` with the JSON path of the first error."""
    try:
        jsonschema.validate(doc, schema)
    except jsonschema.ValidationError as err:
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(f"{what}: field {where}: {err.message}") from None
    return doc


def read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read {path}: {err.strerror}") from None
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}: invalid JSON ({err.msg} at line {err.lineno})") from None


def _wrap(fn, what):
    try:
        return fn()
    except ConfigError:
        raise
    except (ValueError, KeyError, TypeError) as err:
        raise ConfigError(f"{what}: {err}") from None


def model_from_doc(doc, what="model"):
    from .levy import LevyModel

    validate(doc, MODEL_SCHEMA, what)
    return _wrap(lambda: LevyModel.from_dict(doc), what)


def nu_from_doc(doc, what="nu"):
    """``(DislocationMeasure, alpha or None)`` from a JSON document."""
    from .fragmentation import DislocationMeasure

    validate(doc, NU_SCHEMA, what)
    return _wrap(lambda: DislocationMeasure.from_dict(doc), what), doc.get("alpha")


def psi_from_doc(doc, what="psi"):
    from .psi import get_psi

    validate(doc, PSI_SCHEMA, what)
    return _wrap(lambda: get_psi(doc["name"], **doc.get("params", {})), what)


def lamperti_from_doc(doc, what="spec"):
    from .lamperti import SelfSimilarProcessSpec

    validate(doc, LAMPERTI_SCHEMA, what)
    psi = psi_from_doc(doc["psi"], f"{what}/psi")
    driver = model_from_doc(doc["driver"], f"{what}/driver")
    start = doc.get("start")
    return _wrap(lambda: SelfSimilarProcessSpec(psi, driver, doc["alpha"], doc.get("beta", 1.0),
                                                None if start is None else np.atleast_1d(start)), what)


def components_from_doc(doc, what="components"):
    from .invariance import get_components

    validate(doc, COMPONENT_SCHEMA, what)
    return _wrap(lambda: get_components(doc["component"], **dict(doc.get("params", {}))), what)


def load(path, kind):
    """Load and build a ``model``, ``nu``, ``spec`` or ``components`` document from a file."""
    builders = {"model": model_from_doc, "nu": nu_from_doc, "spec": lamperti_from_doc,
                "components": components_from_doc}
    return builders[kind](read_json(path), str(path))


def dumps(obj):
    """Deterministic JSON (sorted keys, full precision floats)."""
    return json.dumps(_plain(obj), sort_keys=True, indent=2, allow_nan=True)


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if hasattr(obj, "value") and hasattr(obj, "name") and not isinstance(obj, (int, str)):
        return obj.value
    return obj
