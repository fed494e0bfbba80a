"""Hyperproperty term AST and its textual s-expression form."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Optional, Union

from .problems import CandidateProgram
from .values import Value
from .wire import decode_wire_value, encode_wire_value


@dataclass(frozen=True)
class Const:
    value: Value


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Call:
    program: CandidateProgram
    args: tuple

    def __post_init__(self) -> None:
        object.__setattr__(self, "args", tuple(self.args))


@dataclass(frozen=True)
class Tolerate:
    term: "Term"


@dataclass(frozen=True)
class Eq:
    left: "Term"
    right: "Term"


@dataclass(frozen=True)
class In:
    item: "Term"
    collection: "Term"


@dataclass(frozen=True)
class Or:
    left: "Term"
    right: "Term"


@dataclass(frozen=True)
class And:
    left: "Term"
    right: "Term"


@dataclass(frozen=True)
class Not:
    term: "Term"


@dataclass(frozen=True)
class Implies:
    left: "Term"
    right: "Term"


@dataclass(frozen=True)
class Proj:
    """Positional projection out of a tuple-valued term."""

    term: "Term"
    index: int


@dataclass(frozen=True)
class MapSeq:
    """Apply a candidate elementwise over a sequence-valued term."""

    program: CandidateProgram
    seq: "Term"


@dataclass(frozen=True)
class ExplicitDomain:
    values: tuple

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", tuple(self.values))


@dataclass(frozen=True)
class ForAll:
    var: str
    domain: object  # Term or ExplicitDomain
    body: "Term"
    label: Optional[str] = None


Term = Union[Const, Var, Call, Tolerate, Eq, In, Or, And, Not, Implies, Proj, MapSeq, ForAll]


def conjoin(clauses) -> Term:
    clauses = list(clauses)
    if not clauses:
        raise ValueError("cannot conjoin zero clauses")
    term = clauses[0]
    for clause in clauses[1:]:
        term = And(term, clause)
    return term


# --- s-expression serialization -------------------------------------------
#
# Grammar (values embed their wire-JSON form):
#   term   := (const <json>) | (var NAME) | (call ID term*) | (tolerate term)
#           | (eq term term) | (in term term) | (or term term) | (and term term)
#           | (not term) | (implies term term) | (proj term INDEX)
#           | (map-seq ID term)
#           | (forall NAME domain term LABEL?)
#   domain := (explicit <json>*) | term


def _quote(s: str) -> str:
    return json.dumps(s)


def _value_sexpr(v: Value) -> str:
    return json.dumps(encode_wire_value(v), separators=(",", ":"), sort_keys=True)


def to_sexpr(term) -> str:
    if isinstance(term, Const):
        return f"(const {_value_sexpr(term.value)})"
    if isinstance(term, Var):
        return f"(var {term.name})"
    if isinstance(term, Call):
        inner = " ".join(to_sexpr(a) for a in term.args)
        sep = " " if inner else ""
        return f"(call {_quote(term.program.id)}{sep}{inner})"
    if isinstance(term, Tolerate):
        return f"(tolerate {to_sexpr(term.term)})"
    if isinstance(term, Eq):
        return f"(eq {to_sexpr(term.left)} {to_sexpr(term.right)})"
    if isinstance(term, In):
        return f"(in {to_sexpr(term.item)} {to_sexpr(term.collection)})"
    if isinstance(term, Or):
        return f"(or {to_sexpr(term.left)} {to_sexpr(term.right)})"
    if isinstance(term, And):
        return f"(and {to_sexpr(term.left)} {to_sexpr(term.right)})"
    if isinstance(term, Not):
        return f"(not {to_sexpr(term.term)})"
    if isinstance(term, Implies):
        return f"(implies {to_sexpr(term.left)} {to_sexpr(term.right)})"
    if isinstance(term, Proj):
        return f"(proj {to_sexpr(term.term)} {term.index})"
    if isinstance(term, MapSeq):
        return f"(map-seq {_quote(term.program.id)} {to_sexpr(term.seq)})"
    if isinstance(term, ForAll):
        if isinstance(term.domain, ExplicitDomain):
            dom = "(explicit " + " ".join(_value_sexpr(v) for v in term.domain.values) + ")"
        else:
            dom = to_sexpr(term.domain)
        label = f" {_quote(term.label)}" if term.label else ""
        return f"(forall {term.var} {dom} {to_sexpr(term.body)}{label})"
    raise TypeError(f"not a term: {type(term).__name__}")


class SexprError(Exception):
    pass


def _tokenize(text: str):
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch in "()":
            yield ch
            i += 1
        elif ch == '"' or ch in "{[" or ch.isdigit() or ch == "-" or text.startswith(("true", "false", "null"), i):
            # JSON atom: scan with a raw decoder
            try:
                obj, end = json.JSONDecoder().raw_decode(text, i)
            except json.JSONDecodeError as exc:
                raise SexprError(f"bad JSON atom at {i}: {exc}") from exc
            yield ("json", obj)
            i = end
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in "()":
                j += 1
            yield ("sym", text[i:j])
            i = j


def _parse_tokens(tokens: list, pos: int):
    tok = tokens[pos]
    if tok == "(":
        items = []
        pos += 1
        while tokens[pos] != ")":
            item, pos = _parse_tokens(tokens, pos)
            items.append(item)
        return items, pos + 1
    if tok == ")":
        raise SexprError("unbalanced parenthesis")
    return tok, pos + 1


def parse_sexpr(text: str, resolver: Mapping[str, CandidateProgram]):
    """Parse a term; candidate ids resolve through the given mapping."""
    tokens = list(_tokenize(text))
    tree, pos = _parse_tokens(tokens, 0)
    if pos != len(tokens):
        raise SexprError("trailing tokens after term")
    return _build(tree, resolver)


def _sym(node) -> str:
    if isinstance(node, tuple) and node[0] == "sym":
        return node[1]
    raise SexprError(f"expected symbol, got {node!r}")


def _atom(node):
    if isinstance(node, tuple) and node[0] == "json":
        return node[1]
    if isinstance(node, tuple) and node[0] == "sym":
        return node[1]
    raise SexprError(f"expected atom, got {node!r}")


def _resolve(resolver, node) -> CandidateProgram:
    cid = _atom(node)
    if cid not in resolver:
        raise SexprError(f"unknown candidate id {cid!r}")
    return resolver[cid]


def _build(node, resolver):
    if not isinstance(node, list) or not node:
        raise SexprError(f"expected form, got {node!r}")
    head = _sym(node[0])
    rest = node[1:]
    if head == "const":
        return Const(decode_wire_value(_atom(rest[0])))
    if head == "var":
        return Var(_sym(rest[0]))
    if head == "call":
        return Call(_resolve(resolver, rest[0]), tuple(_build(a, resolver) for a in rest[1:]))
    if head == "tolerate":
        return Tolerate(_build(rest[0], resolver))
    if head in ("eq", "in", "or", "and", "implies"):
        cls = {"eq": Eq, "in": In, "or": Or, "and": And, "implies": Implies}[head]
        return cls(_build(rest[0], resolver), _build(rest[1], resolver))
    if head == "not":
        return Not(_build(rest[0], resolver))
    if head == "proj":
        return Proj(_build(rest[0], resolver), int(_atom(rest[1])))
    if head == "map-seq":
        return MapSeq(_resolve(resolver, rest[0]), _build(rest[1], resolver))
    if head == "forall":
        var = _sym(rest[0])
        dom_node = rest[1]
        if isinstance(dom_node, list) and dom_node and _sym(dom_node[0]) == "explicit":
            domain = ExplicitDomain(tuple(decode_wire_value(_atom(v)) for v in dom_node[1:]))
        else:
            domain = _build(dom_node, resolver)
        body = _build(rest[2], resolver)
        label = _atom(rest[3]) if len(rest) > 3 else None
        return ForAll(var, domain, body, label)
    raise SexprError(f"unknown form {head!r}")
