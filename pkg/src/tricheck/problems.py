"""Problem descriptions, signatures, candidate programs and test-input sets."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Mapping, Optional, Sequence

from .values import Normal, Value, outcome_fingerprint


class RoleKind(Enum):
    ORIGINAL = "original"
    INVERSE = "inverse"
    PARTIAL_INVERSE = "partial-inverse"
    SET_VALUED_INVERSE = "set-valued-inverse"
    ENUMERATION = "enumeration"
    POINTWISE = "pointwise"
    UNION_BRANCH = "union-branch"


_INDEXED_ROLES = {RoleKind.PARTIAL_INVERSE, RoleKind.SET_VALUED_INVERSE}


@dataclass(frozen=True)
class Role:
    kind: RoleKind
    arg_index: Optional[int] = None
    branch_tag: Optional[str] = None

    def __post_init__(self) -> None:
        if self.kind in _INDEXED_ROLES and self.arg_index is None:
            raise ValueError(f"{self.kind.value} role requires arg_index")
        if self.kind is RoleKind.UNION_BRANCH and not self.branch_tag:
            raise ValueError("union-branch role requires a branch tag")


ORIGINAL = Role(RoleKind.ORIGINAL)


@dataclass(frozen=True)
class FunctionSignature:
    name: str
    params: tuple  # of (name, semantic type tag) pairs
    returns: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "params", tuple((n, t) for n, t in self.params))
        names = [n for n, _ in self.params]
        if len(set(names)) != len(names):
            raise ValueError("parameter names must be unique")

    @property
    def arity(self) -> int:
        return len(self.params)


@dataclass(frozen=True)
class ProblemDescription:
    id: str
    text: str
    signature: FunctionSignature
    role: Role = ORIGINAL

    def __post_init__(self) -> None:
        if self.signature.arity < 1:
            raise ValueError("problem signatures need at least one parameter")
        if self.role.arg_index is not None and self.role.arg_index >= self.signature.arity:
            # Inverse-style signatures are derived from the original, so the
            # inverted index is checked against the originating arity upstream;
            # here we only reject indices that no signature could have carried.
            if self.role.arg_index < 0:
                raise ValueError("arg_index must be non-negative")


def args_key(args: Sequence[Value]) -> bytes:
    """Canonical key for an argument tuple (fixture tables, dedup, caching).

    Matches the canonical encoding byte-for-byte on normal/full-set arguments
    and stays total over subset-marked ones (runner-backed calls may carry
    them even though fixture tables never do).
    """
    return b"(" + b"".join(outcome_fingerprint(a) for a in args) + b")"


@dataclass(frozen=True)
class FixtureBacked:
    """Lookup-table backend: canonical args key -> output value.

    The table must be total over every input set the candidate is used with;
    a missing key is a hard error, not an undefined outcome.
    """

    table: Mapping[bytes, Value]


@dataclass(frozen=True)
class RunnerBacked:
    """Worker-process backend speaking the wire protocol on its stdio."""

    source_path: str
    entrypoint: str
    command: Optional[tuple] = None  # argv prefix; TRI_WORKER_CMD overrides
    extra_args: tuple = ()


@dataclass(frozen=True)
class Derived:
    """Backend computed from other candidates (stream lifting, composition)."""

    compute: Callable  # (args: tuple[Value, ...], executor) -> Value
    describe: str = ""


Backend = object


@dataclass(frozen=True)
class CandidateProgram:
    id: str
    problem_id: str
    backend: Backend


class Provenance(Enum):
    LLM_GENERATED = "llm-generated"
    FIXTURE = "fixture"


@dataclass(frozen=True)
class TestInputSet:
    __test__ = False  # not a pytest collection target

    problem_id: str
    inputs: tuple  # of argument tuples, each argument a Normal value
    provenance: Provenance = Provenance.FIXTURE

    def __post_init__(self) -> None:
        deduped = []
        seen = set()
        for args in self.inputs:
            args = tuple(args)
            for a in args:
                if not isinstance(a, Normal):
                    raise ValueError("test inputs must be Normal values")
            key = args_key(args)
            if key not in seen:
                seen.add(key)
                deduped.append(args)
        if not deduped:
            raise ValueError("test input set is empty")
        object.__setattr__(self, "inputs", tuple(deduped))

    def __len__(self) -> int:
        return len(self.inputs)


def fixture_candidate(
    candidate_id: str,
    problem_id: str,
    table,
) -> CandidateProgram:
    """Fixture-backed candidate from {args: value} or [(args, value), ...]."""
    pairs = table.items() if isinstance(table, Mapping) else table
    encoded = {args_key(args): out for args, out in pairs}
    return CandidateProgram(candidate_id, problem_id, FixtureBacked(encoded))


def table_from_fn(
    fn: Callable,
    inputs: Sequence[tuple],
) -> list:
    """Tabulate a python function over argument tuples of Values."""
    return [(tuple(args), fn(*args)) for args in inputs]


def candidate_from_fn(
    candidate_id: str,
    problem_id: str,
    fn: Callable,
    inputs: Sequence[tuple],
) -> CandidateProgram:
    return fixture_candidate(candidate_id, problem_id, table_from_fn(fn, inputs))
