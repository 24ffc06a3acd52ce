"""JSON document format for effort graphs.

Weights and the budget are exact rationals, so they are encoded as JSON
integers or "p/q" strings and survive a round trip unchanged.  Curve
parameters and mechanism weights are inherently floats and stay decimal.
Unknown keys are rejected at every level so that typos fail loudly
instead of silently dropping an edge.
"""

from __future__ import annotations

import json
from fractions import Fraction

from .model import ConcaveFn, EffortGraph

_TOP_KEYS = {"actions", "features", "edges", "budget"}
_FEATURE_KEYS = {"name", "f"}
_EDGE_KEYS = {"action", "feature", "weight"}
_F_KEYS = {
    "linear": {"family", "scale"},
    "expsat": {"family", "scale", "rate"},
    "log1p": {"family", "scale", "rate"},
    "sqrtshift": {"family", "scale", "shift"},
}


class DocumentError(ValueError):
    """Malformed graph document (bad shape, key, or encoding)."""


def _reject_unknown(obj: dict, allowed: set, where: str):
    unknown = set(obj) - allowed
    if unknown:
        raise DocumentError(
            f"unknown key {sorted(unknown)[0]!r} in {where}"
        )


def _rational(v, where: str) -> Fraction:
    # bool is an int subclass; reject it explicitly
    if type(v) is int:
        return Fraction(v)
    if isinstance(v, str):
        try:
            return Fraction(v)
        except (ValueError, ZeroDivisionError) as e:
            raise DocumentError(f"bad rational {v!r} in {where}: {e}") from None
    raise DocumentError(
        f"{where} must be an integer or a rational string, got {v!r}"
    )


def _decimal(v, where: str) -> float:
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return float(v)
    raise DocumentError(f"{where} must be a number, got {v!r}")


def _parse_curve(obj, where: str) -> ConcaveFn:
    if not isinstance(obj, dict):
        raise DocumentError(f"{where} must be an object")
    family = obj.get("family")
    if family not in _F_KEYS:
        raise DocumentError(f"unknown curve family {family!r} in {where}")
    _reject_unknown(obj, _F_KEYS[family], where)
    missing = _F_KEYS[family] - set(obj)
    if missing:
        raise DocumentError(f"missing key {sorted(missing)[0]!r} in {where}")
    scale = _decimal(obj["scale"], f"{where}.scale")
    if family == "linear":
        return ConcaveFn.linear(scale)
    if family == "expsat":
        return ConcaveFn.expsat(scale, _decimal(obj["rate"], f"{where}.rate"))
    if family == "log1p":
        return ConcaveFn.log1p(scale, _decimal(obj["rate"], f"{where}.rate"))
    return ConcaveFn.sqrtshift(scale, _decimal(obj["shift"], f"{where}.shift"))


def parse_graph(text: str) -> EffortGraph:
    """Parse a JSON graph document; raises json.JSONDecodeError on
    malformed JSON (carrying line/column) and DocumentError on a
    well-formed document with the wrong shape."""
    doc = json.loads(text)
    if not isinstance(doc, dict):
        raise DocumentError("document root must be an object")
    _reject_unknown(doc, _TOP_KEYS, "document")
    missing = _TOP_KEYS - set(doc)
    if missing:
        raise DocumentError(f"missing key {sorted(missing)[0]!r} in document")

    actions = doc["actions"]
    if not isinstance(actions, list) or not all(isinstance(a, str) for a in actions):
        raise DocumentError("actions must be a list of names")

    if not isinstance(doc["features"], list):
        raise DocumentError("features must be a list")
    features, fns = [], []
    for k, entry in enumerate(doc["features"]):
        where = f"features[{k}]"
        if not isinstance(entry, dict):
            raise DocumentError(f"{where} must be an object")
        _reject_unknown(entry, _FEATURE_KEYS, where)
        if "name" not in entry or "f" not in entry:
            raise DocumentError(f"{where} needs 'name' and 'f'")
        if not isinstance(entry["name"], str):
            raise DocumentError(f"{where}.name must be a string")
        features.append(entry["name"])
        fns.append(_parse_curve(entry["f"], f"{where}.f"))

    a_index = {a: j for j, a in enumerate(actions)}
    f_index = {f: i for i, f in enumerate(features)}
    weights = [[Fraction(0)] * len(features) for _ in actions]
    if not isinstance(doc["edges"], list):
        raise DocumentError("edges must be a list")
    seen = set()
    for k, entry in enumerate(doc["edges"]):
        where = f"edges[{k}]"
        if not isinstance(entry, dict):
            raise DocumentError(f"{where} must be an object")
        _reject_unknown(entry, _EDGE_KEYS, where)
        if set(entry) != _EDGE_KEYS:
            raise DocumentError(f"{where} needs 'action', 'feature', 'weight'")
        a, f = entry["action"], entry["feature"]
        if a not in a_index:
            raise DocumentError(f"{where}: unknown action {a!r}")
        if f not in f_index:
            raise DocumentError(f"{where}: unknown feature {f!r}")
        if (a, f) in seen:
            raise DocumentError(f"{where}: duplicate edge {a!r} -> {f!r}")
        seen.add((a, f))
        weights[a_index[a]][f_index[f]] = _rational(
            entry["weight"], f"{where}.weight"
        )

    budget = _rational(doc["budget"], "budget")
    return EffortGraph(
        actions=tuple(actions),
        features=tuple(features),
        fns=tuple(fns),
        weights=tuple(tuple(row) for row in weights),
        budget=budget,
    )


def rational_str(q: Fraction) -> str | int:
    """JSON encoding of an exact rational: int when integral, else 'p/q'."""
    q = Fraction(q)
    if q.denominator == 1:
        return int(q)
    return f"{q.numerator}/{q.denominator}"


def _curve_obj(fn: ConcaveFn) -> dict:
    obj = {"family": fn.family, "scale": fn.scale}
    if fn.family in ("expsat", "log1p"):
        obj["rate"] = fn.rate
    elif fn.family == "sqrtshift":
        obj["shift"] = fn.shift
    return obj


def emit_graph(graph: EffortGraph) -> str:
    """Serialize; parse(emit(g)) == g exactly.  Zero-weight edges are
    omitted, matching the sparse input convention."""
    doc = {
        "actions": list(graph.actions),
        "features": [
            {"name": name, "f": _curve_obj(fn)}
            for name, fn in zip(graph.features, graph.fns)
        ],
        "edges": [
            {
                "action": graph.actions[j],
                "feature": graph.features[i],
                "weight": rational_str(w),
            }
            for j, row in enumerate(graph.weights)
            for i, w in enumerate(row)
            if w != 0
        ],
        "budget": rational_str(graph.budget),
    }
    return json.dumps(doc, indent=2) + "\n"


def load_graph(path: str) -> EffortGraph:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_graph(fh.read())


def save_graph(path: str, graph: EffortGraph) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(emit_graph(graph))
