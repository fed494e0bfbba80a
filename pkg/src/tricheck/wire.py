"""Wire protocol value codec.

Newline-delimited frames, each a single JSON object.
Requests:  {"id": str, "op": "call", "args": [wire values]}
Responses: {"id": str, "status": "ok"|"invalid-input"|"error",
            "value"?: wire value, "message"?: str}

Wire values: scalars as-is; none as {"none": true}; tuples as {"tuple": [...]};
sets as {"set": {"kind": "full"|"subset", "values": [...]}}. Plain JSON arrays
are sequences, plain objects are string-keyed maps. The keys "none", "set" and
"tuple" are reserved: a single-key map using one of them cannot be encoded.
"""

from __future__ import annotations

import json
from typing import Any

from .values import (
    Normal,
    SetKind,
    SetVal,
    Special,
    SpecialKind,
    Value,
)

RESERVED_KEYS = ("none", "set", "tuple")


class WireError(Exception):
    """Malformed frame or unencodable value."""


def _payload_to_wire(p: object) -> Any:
    if p is None:
        return {"none": True}
    if isinstance(p, bool) or isinstance(p, str):
        return p
    if isinstance(p, int):
        return p
    if isinstance(p, list):
        return [_payload_to_wire(x) for x in p]
    if isinstance(p, tuple):
        return {"tuple": [_payload_to_wire(x) for x in p]}
    if isinstance(p, dict):
        if len(p) == 1 and next(iter(p)) in RESERVED_KEYS:
            raise WireError(f"map key {next(iter(p))!r} is reserved on the wire")
        return {k: _payload_to_wire(v) for k, v in p.items()}
    raise WireError(f"unencodable payload: {type(p).__name__}")


def encode_wire_value(v: Value) -> Any:
    if isinstance(v, Normal):
        return _payload_to_wire(v.payload)
    if isinstance(v, SetVal):
        return {
            "set": {
                "kind": v.kind.value,
                "values": [encode_wire_value(e) for e in v.elements],
            }
        }
    raise WireError("special values do not cross the wire as values")


def _wire_to_payload(obj: Any) -> object:
    if obj is None:
        raise WireError("bare null is not a wire value; none is {'none': true}")
    if isinstance(obj, bool) or isinstance(obj, str):
        return obj
    if isinstance(obj, int):
        return obj
    if isinstance(obj, float):
        raise WireError("floating-point values are outside the value model")
    if isinstance(obj, list):
        return [_wire_to_payload(x) for x in obj]
    if isinstance(obj, dict):
        if set(obj.keys()) == {"none"} and obj["none"] is True:
            return None
        if set(obj.keys()) == {"tuple"}:
            items = obj["tuple"]
            if not isinstance(items, list):
                raise WireError("tuple wrapper must hold a list")
            return tuple(_wire_to_payload(x) for x in items)
        if set(obj.keys()) == {"set"}:
            raise WireError("sets cannot appear inside plain payloads")
        return {str(k): _wire_to_payload(v) for k, v in obj.items()}
    raise WireError(f"undecodable wire value: {type(obj).__name__}")


def decode_wire_value(obj: Any) -> Value:
    """Decode one wire value into a runtime value.

    Round-trips with encode_wire_value over the whole value model minus
    specials (statuses, not values, carry those).
    """
    if isinstance(obj, dict) and set(obj.keys()) == {"set"}:
        body = obj["set"]
        if (
            not isinstance(body, dict)
            or set(body.keys()) != {"kind", "values"}
            or body["kind"] not in ("full", "subset")
            or not isinstance(body["values"], list)
        ):
            raise WireError("malformed set wrapper")
        kind = SetKind.FULL if body["kind"] == "full" else SetKind.SUBSET
        return SetVal(kind, tuple(decode_wire_value(x) for x in body["values"]))
    return Normal(_wire_to_payload(obj))


def decode_response_frame(line: bytes) -> tuple:
    """Parse a response frame into (frame id, value-or-special, message).

    status "ok" carries a value; "invalid-input" maps to the undefined special;
    "error" maps to the demonic special. Any malformation raises WireError.
    """
    try:
        obj = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise WireError(f"unparseable frame: {exc}") from exc
    if not isinstance(obj, dict) or "id" not in obj or "status" not in obj:
        raise WireError("response frame missing id/status")
    status = obj["status"]
    message = obj.get("message")
    if status == "ok":
        if "value" not in obj:
            raise WireError("ok response missing value")
        return obj["id"], decode_wire_value(obj["value"]), message
    if status == "invalid-input":
        return obj["id"], Special(SpecialKind.UNDEFINED), message
    if status == "error":
        return obj["id"], Special(SpecialKind.DEMONIC), message
    raise WireError(f"unknown status {status!r}")


def encode_request_frame(frame_id: str, args: tuple) -> bytes:
    obj = {"id": frame_id, "op": "call", "args": [encode_wire_value(a) for a in args]}
    return json.dumps(obj, separators=(",", ":")).encode("utf-8") + b"\n"
