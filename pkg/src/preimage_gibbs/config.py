"""Run configuration: JSON schema, defaults, and builders for systems/potentials."""

from __future__ import annotations

import copy
import json
from pathlib import Path

import jsonschema

from .errors import ConfigError
from .measure import (Character, Cylinder, ShiftPoint, TestDictionary, format_word, parse_word,
                      sobolev_weight)
from .potential import LocallyConstantPotential, TrigPotential
from .shift import ShiftSystem
from .torus import LatticeMap, TrigPolynomial, parse_point

KINDS = ("preimages", "fixpoints", "pressure", "mu-n", "periodic-measure", "l1-stat",
         "pointwise", "lemma1-check", "gibbs-ratio")
SAMPLING_KINDS = ("l1-stat",)

_int_matrix = {"type": "array", "minItems": 1, "items": {"type": "array", "items": {"type": "integer"}}}
_word = {"type": ["string", "array"]}

SCHEMA = {
    "type": "object",
    "required": ["kind", "system"],
    "additionalProperties": False,
    "properties": {
        "kind": {"enum": list(KINDS)},
        "system": {
            "oneOf": [
                {"type": "object", "required": ["type", "matrix"], "additionalProperties": False,
                 "properties": {
                     "type": {"const": "torus"},
                     "matrix": _int_matrix,
                     "perturbation": {
                         "type": "object", "required": ["epsilon", "terms"], "additionalProperties": False,
                         "properties": {
                             "epsilon": {"type": "number", "minimum": 0},
                             "terms": {"type": "array", "items": {
                                 "type": "object", "required": ["frequency", "amplitude"],
                                 "additionalProperties": False,
                                 "properties": {"frequency": {"type": "array", "items": {"type": "integer"}},
                                                "amplitude": {"type": "array", "items": {"type": "number"}}}}}}},
                 }},
                {"type": "object", "required": ["type", "adjacency"], "additionalProperties": False,
                 "properties": {"type": {"const": "shift"}, "adjacency": _int_matrix}},
            ]
        },
        "potential": {
            "type": "object", "required": ["type"],
            "properties": {
                "type": {"enum": ["zero", "constant", "table", "symbol", "trig"]},
                "value": {"type": "number"},
                "range": {"type": "integer", "minimum": 1},
                "values": {"type": "object", "additionalProperties": {"type": "number"}},
                "default": {"type": "number"},
                "beta": {"type": "number"},
                "symbol": {"type": "integer", "minimum": 0},
                "constant": {"type": "number"},
                "terms": {"type": "array", "items": {
                    "type": "object", "required": ["frequency"],
                    "properties": {"frequency": {"type": "array", "items": {"type": "integer"}},
                                   "cos": {"type": "number"}, "sin": {"type": "number"}}}},
            },
        },
        "depths": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 1}},
        "point": {"oneOf": [{"type": "array", "items": {"type": ["string", "number", "integer"]}},
                            {"type": "object", "required": ["tail"], "additionalProperties": False,
                             "properties": {"head": _word, "tail": _word}}]},
        "dictionary": {
            "type": "object", "required": ["type"], "additionalProperties": False,
            "properties": {"type": {"enum": ["characters", "cylinders", "constant"]},
                           "K": {"type": "integer", "minimum": 1},
                           "L": {"type": "integer", "minimum": 1},
                           "weights": {"enum": ["unit", "sobolev", "length"]}},
        },
        "test_functions": {"type": "array", "minItems": 1, "items": {
            "oneOf": [
                {"type": "object", "required": ["type", "k"], "additionalProperties": False,
                 "properties": {"type": {"const": "character"},
                                "k": {"type": "array", "items": {"type": "integer"}},
                                "part": {"enum": ["cos", "sin"]}}},
                {"type": "object", "required": ["type", "word"], "additionalProperties": False,
                 "properties": {"type": {"const": "cylinder"}, "word": _word}},
            ]}},
        "samples": {"type": "integer", "minimum": 1},
        "seed": {"type": ["integer", "null"]},
        "sampler": {"type": "object", "additionalProperties": False,
                    "properties": {"kind": {"enum": ["auto", "haar", "periodic"]},
                                   "depth": {"type": ["integer", "null"], "minimum": 1},
                                   "denominator": {"type": "integer", "minimum": 1}}},
        "tolerance": {"type": ["number", "null"]},
        "max_past": {"type": "integer", "minimum": 0},
        "max_future": {"type": "integer", "minimum": 0},
        "extra_depth": {"type": "integer", "minimum": 0},
        "force": {"type": "boolean"},
        "threads": {"type": "integer", "minimum": 1},
        "emit_measures": {"type": "boolean"},
    },
}

DEFAULTS = {
    "potential": {"type": "zero"},
    "depths": [1, 2, 3, 4],
    "samples": 50,
    "seed": None,
    "sampler": {"kind": "auto", "depth": None, "denominator": 10**6},
    "tolerance": None,
    "max_past": 3,
    "max_future": 3,
    "extra_depth": 2,
    "force": False,
    "threads": 1,
    "emit_measures": False,
}


def load_config(path) -> dict:
    """Read a config file, or a run manifest (whose ``config`` entry is used)."""
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if isinstance(data, dict) and "config" in data and "kind" not in data:
        data = data["config"]
    return data


def complete(config: dict) -> dict:
    """Validate and fill every default, so the echo has no hidden parameters."""
    try:
        jsonschema.validate(config, SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"config schema violation at {list(exc.absolute_path)}: {exc.message}") from exc
    cfg = copy.deepcopy(DEFAULTS)
    for k, v in config.items():
        if k == "sampler":
            cfg["sampler"].update(v)
        else:
            cfg[k] = copy.deepcopy(v)
    sys_type = cfg["system"]["type"]
    cfg.setdefault("dictionary", {"type": "cylinders", "L": 4} if sys_type == "shift" else {"type": "characters", "K": 3})
    cfg["dictionary"].setdefault("weights", "unit")
    if "point" not in cfg:
        cfg["point"] = {"head": "", "tail": "0"} if sys_type == "shift" else ["0"] * len(cfg["system"]["matrix"])
    if "test_functions" not in cfg:
        cfg["test_functions"] = (_default_cylinders(cfg["system"]["adjacency"]) if sys_type == "shift" else
                                 [{"type": "character", "k": [1] + [0] * (len(cfg["system"]["matrix"]) - 1),
                                   "part": "cos"}])
    if cfg["kind"] in SAMPLING_KINDS and cfg["seed"] is None:
        raise ConfigError(f"experiment {cfg['kind']!r} samples points: an explicit seed is required")
    if cfg["kind"] in ("lemma1-check", "gibbs-ratio") and sys_type != "shift":
        raise ConfigError(f"experiment {cfg['kind']!r} needs a shift system")
    cfg["depths"] = sorted(set(cfg["depths"]))
    return cfg


def _default_cylinders(adjacency) -> list:
    """Two legal length-2 cylinders, preferring 01 and 11."""
    s = len(adjacency)
    order = [(0, 1), (1, 1), (1, 0), (0, 0)] + [(a, b) for a in range(s) for b in range(s)]
    legal = [w for w in dict.fromkeys(order) if max(w) < s and adjacency[w[0]][w[1]]]
    return [{"type": "cylinder", "word": format_word(w)} for w in legal[:2]]


# ---------------------------------------------------------------------------
# builders

def build_system(spec: dict):
    try:
        if spec["type"] == "shift":
            return ShiftSystem(tuple(tuple(r) for r in spec["adjacency"]))
        pert = spec.get("perturbation")
        if pert and pert["terms"]:
            p = TrigPolynomial.from_terms([(t["frequency"], t["amplitude"]) for t in pert["terms"]])
            return LatticeMap(tuple(tuple(r) for r in spec["matrix"]), p, float(pert["epsilon"]))
        return LatticeMap(tuple(tuple(r) for r in spec["matrix"]))
    except (ValueError, ArithmeticError) as exc:
        raise ConfigError(f"invalid system: {exc}") from exc


def build_potential(spec: dict, system):
    t = spec["type"]
    if isinstance(system, ShiftSystem):
        s = system.alphabet_size
        if t == "zero":
            return LocallyConstantPotential.zero(s)
        if t == "constant":
            return LocallyConstantPotential.zero(s).shifted(spec.get("value", 0.0))
        if t == "symbol":
            return LocallyConstantPotential.symbol_weight(s, spec["beta"], spec.get("symbol", 1))
        if t == "table":
            return LocallyConstantPotential.from_table(s, spec.get("range", 1), spec.get("values", {}),
                                                       spec.get("default", 0.0))
        raise ConfigError(f"potential type {t!r} is not available on a shift")
    if t == "zero":
        return TrigPotential(0.0)
    if t == "constant":
        return TrigPotential(spec.get("value", 0.0))
    if t == "trig":
        terms = spec.get("terms", [])
        return TrigPotential(spec.get("constant", 0.0), tuple(tm["frequency"] for tm in terms),
                             tuple(tm.get("cos", 0.0) for tm in terms), tuple(tm.get("sin", 0.0) for tm in terms))
    raise ConfigError(f"potential type {t!r} is not available on the torus")


def build_point(spec, system):
    if isinstance(system, ShiftSystem):
        if not isinstance(spec, dict):
            raise ConfigError("shift points are given as {head, tail}")
        p = ShiftPoint(parse_word(spec.get("head", "")), parse_word(spec["tail"]))
        if not system.is_legal(p):
            raise ConfigError(f"point {p} is not in the shift space")
        return p
    if isinstance(spec, dict) or len(spec) != system.dim:
        raise ConfigError("torus points are given as a list of m coordinates")
    try:
        return parse_point([c if isinstance(c, (float, str)) else int(c) for c in spec])
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"bad coordinate: {exc}") from exc


def build_dictionary(spec: dict, system) -> TestDictionary:
    t = spec["type"]
    if isinstance(system, ShiftSystem):
        if t == "constant":
            return TestDictionary.constant("shift")
        if t != "cylinders":
            raise ConfigError("shift systems use cylinder dictionaries")
        L = spec.get("L", 4)
        words = [tuple(int(a) for a in w) for n in range(1, L + 1) for w in system.legal_words(n)]
        weight = None if spec.get("weights", "unit") == "unit" else (lambda w: 2.0 ** -len(w))
        d = TestDictionary.cylinder_indicators(words, weight)
        return TestDictionary(d.functions, d.weights, name=f"cylinders(L={L},{spec.get('weights', 'unit')})")
    if t == "constant":
        return TestDictionary.constant("torus", system.dim)
    if t != "characters":
        raise ConfigError("toral maps use character dictionaries")
    K = spec.get("K", 3)
    weight = sobolev_weight if spec.get("weights", "unit") == "sobolev" else None
    d = TestDictionary.torus_characters(system.dim, K, weight)
    return TestDictionary(d.functions, d.weights, name=f"characters(K={K},{spec.get('weights', 'unit')})")


def build_test_functions(specs: list, system) -> list:
    out = []
    for s in specs:
        if s["type"] == "character":
            if isinstance(system, ShiftSystem) or len(s["k"]) != system.dim:
                raise ConfigError(f"character {s['k']} does not fit the system")
            out.append(Character(tuple(s["k"]), s.get("part", "cos")))
        else:
            if not isinstance(system, ShiftSystem):
                raise ConfigError("cylinder test functions need a shift system")
            w = parse_word(s["word"])
            if not system.is_legal_word(w):
                raise ConfigError(f"cylinder word {s['word']!r} is not legal")
            out.append(Cylinder(w))
    return out
