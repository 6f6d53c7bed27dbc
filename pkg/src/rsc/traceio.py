"""JSON encoding of traces.

A trace is ``{"actions": [...]}``; each action has a ``kind``, a ``dir``
(``?`` for calls and returnbacks, ``!`` otherwise), for calls and callbacks
a ``fn`` and a ``val``, and the ``heap`` it carries. Values are tagged
objects: ``{"nat": 3}``, ``{"bool": true}``, ``{"unit": null}``,
``{"loc": "lroot"}``, ``{"cap": "kroot"}``, ``{"pair": [v, v]}``. Heap
entries are ``{"addr": ..., "val": ..., "tag": ...}`` where the address is a
number or a location object and the tag is ``"bot"``, a capability object
or, for typed heaps, a ``{"type": "Ref Nat"}`` object. A heap's allocated
capabilities may be listed under an optional ``"caps"`` key of the action.
"""

from __future__ import annotations

import json

import jsonschema

from .lu import CALL, CALLBACK, KINDS, Action, Heap
from .parser import parse_type
from .values import UNIT, Bool, Cap, Loc, Pair, Unit


class TraceError(Exception):
    pass


_ID = {"type": ["integer", "string"]}

SCHEMA = {
    "$defs": {
        "value": {
            "oneOf": [
                {"type": "object", "properties": {"nat": {"type": "integer"}},
                 "required": ["nat"], "additionalProperties": False},
                {"type": "object", "properties": {"bool": {"type": "boolean"}},
                 "required": ["bool"], "additionalProperties": False},
                {"type": "object", "properties": {"unit": {"type": "null"}},
                 "required": ["unit"], "additionalProperties": False},
                {"type": "object", "properties": {"loc": _ID},
                 "required": ["loc"], "additionalProperties": False},
                {"type": "object", "properties": {"cap": _ID},
                 "required": ["cap"], "additionalProperties": False},
                {"type": "object",
                 "properties": {"pair": {"type": "array", "minItems": 2, "maxItems": 2,
                                         "items": {"$ref": "#/$defs/value"}}},
                 "required": ["pair"], "additionalProperties": False},
            ]
        },
        "tag": {
            "oneOf": [
                {"const": "bot"},
                {"type": "object", "properties": {"cap": _ID},
                 "required": ["cap"], "additionalProperties": False},
                {"type": "object", "properties": {"type": {"type": "string"}},
                 "required": ["type"], "additionalProperties": False},
            ]
        },
        "cell": {
            "type": "object",
            "properties": {
                "addr": {"oneOf": [
                    {"type": "integer"},
                    {"type": "object", "properties": {"loc": _ID}, "required": ["loc"],
                     "additionalProperties": False}]},
                "val": {"$ref": "#/$defs/value"},
                "tag": {"$ref": "#/$defs/tag"},
            },
            "required": ["addr", "val"],
            "additionalProperties": False,
        },
        "action": {
            "type": "object",
            "properties": {
                "kind": {"enum": list(KINDS)},
                "dir": {"enum": ["?", "!"]},
                "fn": {"type": "string"},
                "val": {"$ref": "#/$defs/value"},
                "heap": {"type": "array", "items": {"$ref": "#/$defs/cell"}},
                "caps": {"type": "array", "items": _ID},
            },
            "required": ["kind", "heap"],
            "additionalProperties": False,
        },
    },
    "type": "object",
    "properties": {"actions": {"type": "array", "items": {"$ref": "#/$defs/action"}}},
    "required": ["actions"],
    "additionalProperties": False,
}


def encode_value(v):
    match v:
        case Bool(b):
            return {"bool": b}
        case Unit():
            return {"unit": None}
        case Loc(i):
            return {"loc": i}
        case Cap(i):
            return {"cap": i}
        case Pair(a, b):
            return {"pair": [encode_value(a), encode_value(b)]}
        case int():
            return {"nat": v}
    raise TraceError(f"cannot encode value {v!r}")


def decode_value(d):
    (key, x), = d.items()
    match key:
        case "nat":
            return x
        case "bool":
            return Bool(x)
        case "unit":
            return UNIT
        case "loc":
            return Loc(x)
        case "cap":
            return Cap(x)
        case "pair":
            return Pair(decode_value(x[0]), decode_value(x[1]))
    raise TraceError(f"unknown value tag {key!r}")


def _encode_tag(t):
    if t is None:
        return "bot"
    if isinstance(t, Cap):
        return {"cap": t.id}
    return {"type": repr(t)}


def _decode_tag(t):
    if t is None or t == "bot":
        return None
    if "cap" in t:
        return Cap(t["cap"])
    return parse_type(t["type"])


def _addr_key(a):
    return (0, str(a.id)) if isinstance(a, Loc) else (1, a)


def encode_action(a: Action) -> dict:
    out = {"kind": a.kind, "dir": a.dir}
    if a.kind in (CALL, CALLBACK):
        out["fn"] = a.fn
        out["val"] = encode_value(a.val)
    cells = []
    for addr in sorted(a.heap.cells, key=_addr_key):
        v, tag = a.heap.cells[addr]
        cells.append({"addr": {"loc": addr.id} if isinstance(addr, Loc) else addr,
                      "val": encode_value(v), "tag": _encode_tag(tag)})
    out["heap"] = cells
    if a.heap.caps:
        out["caps"] = sorted((k.id for k in a.heap.caps), key=str)
    return out


def decode_action(d: dict) -> Action:
    kind = d["kind"]
    if kind in (CALL, CALLBACK) and ("fn" not in d or "val" not in d):
        raise TraceError(f"a {kind} action needs fn and val")
    cells = {}
    for c in d["heap"]:
        addr = Loc(c["addr"]["loc"]) if isinstance(c["addr"], dict) else c["addr"]
        if addr in cells:
            raise TraceError(f"address {addr!r} appears twice in one heap")
        cells[addr] = (decode_value(c["val"]), _decode_tag(c.get("tag")))
    heap = Heap(cells, frozenset(Cap(k) for k in d.get("caps", ())))
    fn = d.get("fn") if kind in (CALL, CALLBACK) else None
    val = decode_value(d["val"]) if kind in (CALL, CALLBACK) else None
    action = Action(kind, fn, val, heap)
    if "dir" in d and d["dir"] != action.dir:
        raise TraceError(f"a {kind} action has direction {action.dir}, not {d['dir']}")
    return action


def dumps(trace) -> str:
    return json.dumps({"actions": [encode_action(a) for a in trace]}, indent=2)


def loads(text: str) -> list:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TraceError(f"not JSON: {exc}") from exc
    try:
        jsonschema.validate(data, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(map(str, exc.absolute_path)) or "top level"
        raise TraceError(f"invalid trace at {where}: {exc.message}") from exc
    return [decode_action(a) for a in data["actions"]]
