"""Universal runtime values exchanged with candidate programs.

A value is either a Normal structured datum (none, booleans, arbitrary-precision
integers, strings, sequences, tuples, string-keyed maps), a marked set of values
(full or subset), or one of the three special values used during property
checking: angelic, demonic, undefined.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Union


class SpecialKind(Enum):
    ANGELIC = "angelic"
    DEMONIC = "demonic"
    UNDEFINED = "undefined"


class SetKind(Enum):
    FULL = "full"
    SUBSET = "subset"


class ValueError_(Exception):
    """Raised when a value violates the model's construction rules."""


class EncodingError(Exception):
    """Raised when a value has no canonical encoding (specials, subsets)."""


def _check_payload(p: object) -> None:
    if p is None or isinstance(p, (bool, str)):
        return
    if isinstance(p, int):
        return
    if isinstance(p, float):
        raise ValueError_("floating-point payloads are not part of the value model")
    if isinstance(p, (list, tuple)):
        for item in p:
            _check_payload(item)
        return
    if isinstance(p, dict):
        for k, v in p.items():
            if not isinstance(k, str):
                raise ValueError_("map keys must be strings")
            _check_payload(v)
        return
    raise ValueError_(f"unsupported payload type: {type(p).__name__}")


@dataclass(frozen=True)
class Normal:
    payload: object

    def __post_init__(self) -> None:
        _check_payload(self.payload)


@dataclass(frozen=True)
class SetVal:
    kind: SetKind
    elements: tuple = field(default=())

    def __post_init__(self) -> None:
        object.__setattr__(self, "elements", tuple(self.elements))
        for e in self.elements:
            if isinstance(e, Special):
                raise ValueError_("special values cannot be set elements")
            if not isinstance(e, (Normal, SetVal)):
                raise ValueError_("set elements must be Normal or SetVal values")


@dataclass(frozen=True)
class Special:
    kind: SpecialKind


Value = Union[Normal, SetVal, Special]

ANGELIC = Special(SpecialKind.ANGELIC)
DEMONIC = Special(SpecialKind.DEMONIC)
UNDEFINED = Special(SpecialKind.UNDEFINED)


def _encode_payload(p: object, out: bytearray) -> None:
    if p is None:
        out += b"N"
    elif isinstance(p, bool):  # bool before int: True must not encode as 1
        out += b"T" if p else b"F"
    elif isinstance(p, int):
        out += b"i%de" % p
    elif isinstance(p, str):
        raw = p.encode("utf-8")
        out += b"s%d:" % len(raw)
        out += raw
    elif isinstance(p, list):
        out += b"l"
        for item in p:
            _encode_payload(item, out)
        out += b"e"
    elif isinstance(p, tuple):
        out += b"t"
        for item in p:
            _encode_payload(item, out)
        out += b"e"
    elif isinstance(p, dict):
        out += b"d"
        for k in sorted(p):
            _encode_payload(k, out)
            _encode_payload(p[k], out)
        out += b"e"
    else:  # pragma: no cover - construction already rejects these
        raise EncodingError(f"unencodable payload: {type(p).__name__}")


def _encode(v: Value, out: bytearray) -> None:
    if isinstance(v, Normal):
        out += b"n"
        _encode_payload(v.payload, out)
    elif isinstance(v, SetVal):
        if v.kind is not SetKind.FULL:
            raise EncodingError("subset-marked sets have no canonical encoding")
        parts = sorted({canonical_encode(e) for e in v.elements})
        out += b"S"
        for part in parts:
            out += part
        out += b"e"
    elif isinstance(v, Special):
        raise EncodingError("special values have no canonical encoding")
    else:
        raise EncodingError(f"not a value: {type(v).__name__}")


def canonical_encode(v: Value) -> bytes:
    """Stable injective byte encoding of Normal/full-set values.

    Full sets are order-insensitive and deduplicated; lists, tuples and maps
    keep their structure. Specials and subset-marked sets are rejected.
    """
    out = bytearray()
    _encode(v, out)
    return bytes(out)


def values_equal(a: Value, b: Value) -> bool:
    """Deep structural equality over Normal/full-set values.

    Comparing specials or subset-marked sets is a contract violation; those
    must be routed through the property engine's rules instead.
    """
    return canonical_encode(a) == canonical_encode(b)


def outcome_fingerprint(v: Value) -> bytes:
    """Total fingerprint for clustering and judging.

    Extends the canonical encoding to special values (compared by kind) and
    subset-marked sets; equals canonical_encode on encodable values.
    """
    if isinstance(v, Special):
        return b"!" + v.kind.value.encode()
    if isinstance(v, SetVal) and v.kind is SetKind.SUBSET:
        parts = sorted({outcome_fingerprint(e) for e in v.elements})
        return b"*" + b"".join(parts) + b"e"
    if isinstance(v, SetVal):
        parts = sorted({outcome_fingerprint(e) for e in v.elements})
        return b"S" + b"".join(parts) + b"e"
    return canonical_encode(v)


def contains_subset(v: Value) -> bool:
    if isinstance(v, SetVal):
        if v.kind is SetKind.SUBSET:
            return True
        return any(contains_subset(e) for e in v.elements)
    return False


def strongest(specials: Iterable[SpecialKind]) -> SpecialKind:
    """Strongest special value: demonic > angelic > undefined."""
    kinds = set(specials)
    if not kinds:
        raise ValueError_("strongest() requires at least one special kind")
    if SpecialKind.DEMONIC in kinds:
        return SpecialKind.DEMONIC
    if SpecialKind.ANGELIC in kinds:
        return SpecialKind.ANGELIC
    return SpecialKind.UNDEFINED


def full_set(values: Iterable[Value]) -> SetVal:
    return SetVal(SetKind.FULL, tuple(values))


def subset(values: Iterable[Value]) -> SetVal:
    return SetVal(SetKind.SUBSET, tuple(values))
