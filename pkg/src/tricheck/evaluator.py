"""Evaluates hyperproperty terms under the special-value semantics.

Specials (angelic A, demonic D, undefined U) flow through every connective
with precedence D > A > U over any boolean result. Universal quantification
over a finite domain tolerates a bounded number of angelic branches: the
verdict is true iff every branch is true-or-angelic and the angelic count
stays strictly below T = ceil(angelic_fraction * domain size).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Union

from .harness import ExecutionConfig, Executor
from .terms import (
    And,
    Call,
    Const,
    Eq,
    ExplicitDomain,
    ForAll,
    Implies,
    In,
    MapSeq,
    Not,
    Or,
    Proj,
    Tolerate,
    Var,
)
from .values import (
    ANGELIC,
    DEMONIC,
    Normal,
    SetKind,
    SetVal,
    Special,
    SpecialKind,
    Value,
    contains_subset,
    outcome_fingerprint,
    strongest,
    values_equal,
)

TRUE = Normal(True)
FALSE = Normal(False)


class UnboundVariableError(Exception):
    pass


class PropertyTypeError(Exception):
    """A term is structurally ill-typed for these rules."""


@dataclass(frozen=True)
class EvalConfig:
    angelic_fraction: Fraction = Fraction(1, 3)
    execution: ExecutionConfig = field(default_factory=ExecutionConfig)

    def __post_init__(self) -> None:
        f = Fraction(self.angelic_fraction)
        if not 0 < f <= 1:
            raise ValueError("angelic_fraction must be in (0, 1]")
        object.__setattr__(self, "angelic_fraction", f)


@dataclass
class ForAllStats:
    label: Optional[str]
    var: str
    domain_size: int
    true_count: int
    angelic_count: int
    false_count: int
    demonic_count: int
    threshold: int
    verdict: bool
    subset_domain: bool = False
    first_violation: Optional[Value] = None  # binding of the first failing branch


@dataclass
class EvalResult:
    value: Union[bool, SpecialKind]
    forall_stats: List[ForAllStats] = field(default_factory=list)

    @property
    def is_true(self) -> bool:
        return self.value is True


def angelic_threshold(fraction: Fraction, domain_size: int) -> int:
    """T = ceil(fraction * size), floored at 1 so empty domains are vacuous."""
    t = -((-fraction.numerator * domain_size) // fraction.denominator)
    return max(1, t)


class _Evaluator:
    def __init__(self, cfg: EvalConfig, executor: Executor):
        self.cfg = cfg
        self.executor = executor
        self.stats: List[ForAllStats] = []

    # -- helpers -------------------------------------------------------------

    def _bool_class(self, v: Value) -> str:
        if isinstance(v, Special):
            return v.kind.value
        if isinstance(v, Normal) and v.payload is True:
            return "true"
        if isinstance(v, Normal) and v.payload is False:
            return "false"
        raise PropertyTypeError(f"expected a boolean-or-special value, got {v!r}")

    def _logic(self, op: str, operands: List[Value]) -> Value:
        specials = [v.kind for v in operands if isinstance(v, Special)]
        if specials:
            return Special(strongest(specials))
        bools = [self._bool_class(v) == "true" for v in operands]
        if op == "or":
            return TRUE if (bools[0] or bools[1]) else FALSE
        if op == "and":
            return TRUE if (bools[0] and bools[1]) else FALSE
        if op == "not":
            return TRUE if not bools[0] else FALSE
        if op == "implies":
            return TRUE if (not bools[0] or bools[1]) else FALSE
        raise AssertionError(op)

    # -- rules ---------------------------------------------------------------

    def _eq(self, a: Value, b: Value) -> Value:
        kinds = {v.kind for v in (a, b) if isinstance(v, Special)}
        if SpecialKind.DEMONIC in kinds:
            return DEMONIC
        if isinstance(a, Special) and isinstance(b, Special):
            if a.kind is SpecialKind.UNDEFINED and b.kind is SpecialKind.UNDEFINED:
                return TRUE
            return Special(strongest(kinds))
        if SpecialKind.ANGELIC in kinds:
            return ANGELIC
        if SpecialKind.UNDEFINED in kinds:
            return Special(SpecialKind.UNDEFINED)
        # Equality against a subset-marked set cannot be confirmed: angelic.
        if contains_subset(a) or contains_subset(b):
            return ANGELIC
        return TRUE if values_equal(a, b) else FALSE

    def _in(self, item: Value, coll: Value) -> Value:
        item_special = isinstance(item, Special)
        coll_special = isinstance(coll, Special)
        if item_special and coll_special:
            if item.kind is SpecialKind.UNDEFINED and coll.kind is SpecialKind.UNDEFINED:
                return TRUE
            return Special(strongest([item.kind, coll.kind]))
        if item_special or coll_special:
            kinds = [v.kind for v in (item, coll) if isinstance(v, Special)]
            return Special(strongest(kinds))
        if not isinstance(coll, SetVal):
            return DEMONIC  # a non-set where a set is required is a hard fault
        fp = outcome_fingerprint(item)
        hit = any(outcome_fingerprint(e) == fp for e in coll.elements)
        if coll.kind is SetKind.FULL:
            return TRUE if hit else FALSE
        return TRUE if hit else ANGELIC

    def _forall(self, term: ForAll, env: Dict[str, Value]) -> Value:
        subset_domain = False
        if isinstance(term.domain, ExplicitDomain):
            elements = list(term.domain.values)
        else:
            dom = self._ev(term.domain, env)
            if isinstance(dom, Special):
                verdict = dom.kind is SpecialKind.ANGELIC
                self.stats.append(
                    ForAllStats(term.label, term.var, 0, 0, 0, 0, 0, 0, verdict)
                )
                return TRUE if verdict else FALSE
            if isinstance(dom, SetVal):
                subset_domain = dom.kind is SetKind.SUBSET
                elements = list(dom.elements)
            else:
                raise PropertyTypeError(
                    f"forall domain must be a set or special, got {dom!r}"
                )

        counts = {"true": 0, "angelic": 0, "false": 0, "demonic": 0}
        first_violation: Optional[Value] = None
        for element in elements:
            outcome = self._ev(term.body, {**env, term.var: element})
            cls = self._bool_class(outcome)
            if cls in ("true", "angelic"):
                counts[cls] += 1
            elif cls == "demonic":
                counts["demonic"] += 1
                if first_violation is None:
                    first_violation = element
            else:
                # false and undefined branches both fail the quantifier
                counts["false"] += 1
                if first_violation is None:
                    first_violation = element

        size = len(elements)
        threshold = angelic_threshold(self.cfg.angelic_fraction, size)
        ok = (
            counts["false"] == 0
            and counts["demonic"] == 0
            and counts["angelic"] < threshold
        )
        self.stats.append(
            ForAllStats(
                term.label,
                term.var,
                size,
                counts["true"],
                counts["angelic"],
                counts["false"],
                counts["demonic"],
                threshold,
                ok and not subset_domain,
                subset_domain,
                first_violation,
            )
        )
        if subset_domain:
            # a subset domain cannot witness a universal claim: at best angelic
            return ANGELIC if ok else FALSE
        return TRUE if ok else FALSE

    # -- dispatcher ------------------------------------------------------------

    def _ev(self, term, env: Dict[str, Value]) -> Value:
        if isinstance(term, Const):
            return term.value
        if isinstance(term, Var):
            if term.name not in env:
                raise UnboundVariableError(term.name)
            return env[term.name]
        if isinstance(term, Call):
            args = [self._ev(a, env) for a in term.args]
            kinds = [a.kind for a in args if isinstance(a, Special)]
            if kinds:
                return Special(strongest(kinds))
            return self.executor.execute(term.program, tuple(args)).value
        if isinstance(term, Tolerate):
            v = self._ev(term.term, env)
            if isinstance(v, Special) and v.kind is SpecialKind.UNDEFINED:
                return ANGELIC
            return v
        if isinstance(term, Eq):
            return self._eq(self._ev(term.left, env), self._ev(term.right, env))
        if isinstance(term, In):
            return self._in(self._ev(term.item, env), self._ev(term.collection, env))
        if isinstance(term, Or):
            return self._logic("or", [self._ev(term.left, env), self._ev(term.right, env)])
        if isinstance(term, And):
            return self._logic("and", [self._ev(term.left, env), self._ev(term.right, env)])
        if isinstance(term, Not):
            return self._logic("not", [self._ev(term.term, env)])
        if isinstance(term, Implies):
            return self._logic(
                "implies", [self._ev(term.left, env), self._ev(term.right, env)]
            )
        if isinstance(term, Proj):
            v = self._ev(term.term, env)
            if isinstance(v, Special):
                return v
            if isinstance(v, Normal) and isinstance(v.payload, (tuple, list)):
                try:
                    return Normal(v.payload[term.index])
                except IndexError as exc:
                    raise PropertyTypeError(f"projection index {term.index} out of range") from exc
            raise PropertyTypeError(f"cannot project out of {v!r}")
        if isinstance(term, MapSeq):
            seq = self._ev(term.seq, env)
            if isinstance(seq, Special):
                return seq
            if not (isinstance(seq, Normal) and isinstance(seq.payload, (list, tuple))):
                return DEMONIC
            out, kinds = [], []
            for element in seq.payload:
                v = self.executor.execute(term.program, (Normal(element),)).value
                if isinstance(v, Special):
                    kinds.append(v.kind)
                elif isinstance(v, Normal):
                    out.append(v.payload)
                else:
                    return DEMONIC  # marked sets cannot live inside a sequence
            if kinds:
                return Special(strongest(kinds))
            return Normal(list(out))
        if isinstance(term, ForAll):
            return self._forall(term, env)
        raise PropertyTypeError(f"not a term: {type(term).__name__}")


def eval_term(
    term,
    env: Optional[Dict[str, Value]] = None,
    cfg: Optional[EvalConfig] = None,
    executor: Optional[Executor] = None,
) -> EvalResult:
    """Evaluate a term to a boolean or special, with per-quantifier stats."""
    cfg = cfg or EvalConfig()
    own = executor is None
    executor = executor or Executor(cfg.execution)
    ev = _Evaluator(cfg, executor)
    try:
        v = ev._ev(term, dict(env or {}))
    finally:
        if own:
            executor.close()
    if isinstance(v, Special):
        return EvalResult(v.kind, ev.stats)
    cls = ev._bool_class(v)
    return EvalResult(cls == "true", ev.stats)


def eval_forall_counts(
    term: ForAll,
    env: Optional[Dict[str, Value]] = None,
    cfg: Optional[EvalConfig] = None,
    executor: Optional[Executor] = None,
) -> tuple:
    """(true, angelic, false, demonic, domain size) for one quantifier.

    The quantifier's verdict is reproducible from these counts and the
    threshold; the four categories partition the domain (undefined branches
    count as false ones).
    """
    if not isinstance(term, ForAll):
        raise PropertyTypeError("eval_forall_counts requires a forall term")
    result = eval_term(term, env, cfg, executor)
    stats = result.forall_stats[-1]  # outermost quantifier is appended last
    return (
        stats.true_count,
        stats.angelic_count,
        stats.false_count,
        stats.demonic_count,
        stats.domain_size,
    )
