"""Builds the hyperproperty for each triangulation scheme and checks agreement.

Schemes pair a candidate program with a witness sampled for a transformed
problem: an inverse (round-trip plus injectivity), a set-valued inverse
(membership, closure under the preimage, pairwise disjointness), or an answer
enumerator checked against a set-valued inverse in both containment
directions. A cascade first triangulates enumerators against set-valued
inverses, then checks forward solutions for membership in surviving
enumerators.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, List, Optional, Sequence, Tuple

from .evaluator import EvalConfig, EvalResult, eval_term
from .harness import Executor
from .problems import CandidateProgram, Derived, TestInputSet, args_key
from .terms import (
    And,
    Call,
    Eq,
    ExplicitDomain,
    ForAll,
    In,
    MapSeq,
    Not,
    Proj,
    Term,
    Tolerate,
    Var,
    conjoin,
)
from .values import (
    DEMONIC,
    Normal,
    SetVal,
    Special,
    Value,
    outcome_fingerprint,
)

# One observation is an (argument tuple, output value) pair.
Observation = Tuple[tuple, Value]


class Scheme:
    pass


@dataclass(frozen=True)
class FullFwdInv(Scheme):
    pass


@dataclass(frozen=True)
class PartialFwdInv(Scheme):
    arg_index: int


@dataclass(frozen=True)
class FullFwdSinv(Scheme):
    pass


@dataclass(frozen=True)
class PartialFwdSinv(Scheme):
    arg_index: int


@dataclass(frozen=True)
class FullEnumSinv(Scheme):
    pass


@dataclass(frozen=True)
class PartialEnumSinv(Scheme):
    arg_index: int


@dataclass(frozen=True)
class FwdEnum(Scheme):
    pass


@dataclass(frozen=True)
class Stream(Scheme):
    inner: Scheme

    def __post_init__(self) -> None:
        if isinstance(self.inner, Stream):
            raise ValueError("stream schemes do not nest")


class SchemeMismatchError(Exception):
    """Scheme incompatible with the problem's argument shape."""


@dataclass(frozen=True)
class AgreementVerdict:
    agrees: bool
    counterexample: Optional[tuple] = None  # (clause label, binding value)
    angelic_counts: tuple = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "angelic_counts", tuple(self.angelic_counts))


@dataclass(frozen=True)
class VerdictRecord:
    problem_id: str
    scheme: str
    p_id: str
    q_id: str
    agrees: bool
    counterexample: Optional[str] = None


def scheme_name(scheme: Scheme) -> str:
    if isinstance(scheme, Stream):
        return f"stream({scheme_name(scheme.inner)})"
    names = {
        FullFwdInv: "full-fwd-inv",
        PartialFwdInv: "partial-fwd-inv",
        FullFwdSinv: "full-fwd-sinv",
        PartialFwdSinv: "partial-fwd-sinv",
        FullEnumSinv: "full-enum-sinv",
        PartialEnumSinv: "partial-enum-sinv",
        FwdEnum: "fwd-enum",
    }
    return names[type(scheme)]


# --- shared construction helpers -------------------------------------------


def _arity(test_inputs: TestInputSet) -> int:
    return len(test_inputs.inputs[0])


def _binder_values(test_inputs: TestInputSet) -> List[Value]:
    """Quantifier domain: bare argument for unary problems, tuples otherwise."""
    arity = _arity(test_inputs)
    if arity == 1:
        return [args[0] for args in test_inputs.inputs]
    return [Normal(tuple(a.payload for a in args)) for args in test_inputs.inputs]


def _arg_terms(binder: str, arity: int) -> List[Term]:
    if arity == 1:
        return [Var(binder)]
    return [Proj(Var(binder), i) for i in range(arity)]


def _inverted_index(scheme: Scheme, arity: int) -> int:
    """Index of the inverted parameter; partial schemes need arity >= 2.

    Full schemes invert the whole argument tuple: 0 for unary problems, -1
    as the whole-tuple marker otherwise.
    """
    if isinstance(scheme, (PartialFwdInv, PartialFwdSinv, PartialEnumSinv)):
        if arity < 2:
            raise SchemeMismatchError(
                f"{scheme_name(scheme)} needs at least two parameters"
            )
        if not 0 <= scheme.arg_index < arity:
            raise SchemeMismatchError(
                f"arg_index {scheme.arg_index} out of range for arity {arity}"
            )
        return scheme.arg_index
    return 0 if arity == 1 else -1


def _distinct_values(values: Sequence[Value]) -> List[Value]:
    seen, out = set(), []
    for v in values:
        if isinstance(v, Special):
            continue
        fp = outcome_fingerprint(v)
        if fp not in seen:
            seen.add(fp)
            out.append(v)
    return out


def _target_and_fixed(binder: str, arity: int, inv_index: int) -> Tuple[Term, List[Term]]:
    args = _arg_terms(binder, arity)
    if arity == 1 or inv_index < 0:
        return Var(binder), []
    fixed = [t for k, t in enumerate(args) if k != inv_index]
    return args[inv_index], fixed


# --- property builders ------------------------------------------------------


def _pair_domain(
    observations: Sequence[Observation],
    arity: int,
    inv_index: int,
) -> Tuple[List[Value], List[Term]]:
    """Domain of output pairs for injectivity/disjointness clauses.

    Full schemes pair distinct observed outputs. Partial schemes pair distinct
    outputs together with the fixed arguments of the first observation; when
    two observations carry different fixed arguments, both orientations are
    generated.
    """
    if inv_index < 0 or arity == 1:
        outs = _distinct_values([out for _, out in observations])
        pairs = [
            Normal((a.payload, b.payload))
            for a, b in combinations(outs, 2)
            if isinstance(a, Normal) and isinstance(b, Normal)
        ]
        return pairs, []

    fixed_idx = [k for k in range(arity) if k != inv_index]
    combos: List[tuple] = []
    seen = set()
    for args, out in observations:
        if not isinstance(out, Normal):
            continue
        fixed_payload = tuple(args[k].payload for k in fixed_idx)
        key = args_key((out, Normal(fixed_payload)))
        if key not in seen:
            seen.add(key)
            combos.append((out.payload, fixed_payload))
    pairs = []
    for (o1, f1), (o2, f2) in combinations(combos, 2):
        if outcome_fingerprint(Normal(o1)) == outcome_fingerprint(Normal(o2)):
            continue
        pairs.append(Normal((o1, o2, f1)))
        if f1 != f2:
            pairs.append(Normal((o2, o1, f2)))
    fixed_terms = [Proj(Proj(Var("pr"), 2), m) for m in range(len(fixed_idx))]
    return pairs, fixed_terms


def _fwd_inv_property(
    p: CandidateProgram,
    q: CandidateProgram,
    test_inputs: TestInputSet,
    observations: Sequence[Observation],
    inv_index: int,
    include_bijection: bool,
) -> Term:
    arity = _arity(test_inputs)
    p_args = _arg_terms("i", arity)
    target, fixed = _target_and_fixed("i", arity, inv_index)
    round_trip = ForAll(
        "i",
        ExplicitDomain(_binder_values(test_inputs)),
        Eq(Call(q, [Tolerate(Call(p, p_args)), *fixed]), target),
        label="round-trip",
    )
    if not include_bijection:
        return round_trip
    pair_values, q_fixed = _pair_domain(observations, arity, inv_index)
    injectivity = ForAll(
        "pr",
        ExplicitDomain(pair_values),
        Not(
            Eq(
                Call(q, [Proj(Var("pr"), 0), *q_fixed]),
                Call(q, [Proj(Var("pr"), 1), *q_fixed]),
            )
        ),
        label="injectivity",
    )
    return And(round_trip, injectivity)


def _fwd_sinv_property(
    p: CandidateProgram,
    q: CandidateProgram,
    test_inputs: TestInputSet,
    observations: Sequence[Observation],
    inv_index: int,
    include_bijection: bool,
) -> Term:
    arity = _arity(test_inputs)
    p_args = _arg_terms("i", arity)
    target, fixed = _target_and_fixed("i", arity, inv_index)
    preimage = Call(q, [Tolerate(Call(p, p_args)), *fixed])

    domain = ExplicitDomain(_binder_values(test_inputs))
    l1 = ForAll("i", domain, In(target, preimage), label="L1")

    if arity == 1:
        p_of_alt = Call(p, [Var("i2")])
    elif inv_index < 0:
        p_of_alt = Call(p, [Proj(Var("i2"), k) for k in range(arity)])
    else:
        alt_args = list(p_args)
        alt_args[inv_index] = Var("i2")
        p_of_alt = Call(p, alt_args)
    l2 = ForAll(
        "i",
        domain,
        ForAll("i2", preimage, Eq(p_of_alt, Call(p, p_args)), label="L2/preimage"),
        label="L2",
    )
    if not include_bijection:
        return And(l1, l2)

    pair_values, q_fixed = _pair_domain(observations, arity, inv_index)
    l3 = ForAll(
        "pr",
        ExplicitDomain(pair_values),
        ForAll(
            "x",
            Call(q, [Proj(Var("pr"), 0), *q_fixed]),
            Not(In(Var("x"), Call(q, [Proj(Var("pr"), 1), *q_fixed]))),
            label="L3/elements",
        ),
        label="L3",
    )
    return conjoin([l1, l2, l3])


def _enum_sinv_property(
    p: CandidateProgram,
    q: CandidateProgram,
    test_inputs: TestInputSet,
    observations: Sequence[Observation],
    inv_index: int,
    include_bijection: bool,
) -> Term:
    arity = _arity(test_inputs)
    p_args = _arg_terms("i", arity)
    target, fixed = _target_and_fixed("i", arity, inv_index)

    forward = ForAll(
        "i",
        ExplicitDomain(_binder_values(test_inputs)),
        ForAll(
            "o",
            Call(p, p_args),
            In(target, Call(q, [Var("o"), *fixed])),
            label="dir1/outputs",
        ),
        label="dir1",
    )
    if not include_bijection:
        return forward

    def observed_elements(out: Value) -> List[Value]:
        if isinstance(out, SetVal):
            return [e for e in out.elements if isinstance(e, Normal)]
        if isinstance(out, Normal):
            return [out]
        return []

    if arity == 1 or inv_index < 0:
        out_values = _distinct_values(
            [e for _, out in observations for e in observed_elements(out)]
        )
        if arity == 1:
            p_back = Call(p, [Var("i2")])
        else:
            p_back = Call(p, [Proj(Var("i2"), k) for k in range(arity)])
        backward = ForAll(
            "o",
            ExplicitDomain(out_values),
            ForAll(
                "i2",
                Call(q, [Var("o")]),
                In(Var("o"), p_back),
                label="dir2/preimage",
            ),
            label="dir2",
        )
        return And(forward, backward)

    fixed_idx = [k for k in range(arity) if k != inv_index]
    combos: List[Value] = []
    seen = set()
    for args, out in observations:
        fixed_payload = tuple(args[k].payload for k in fixed_idx)
        for element in observed_elements(out):
            combo = Normal((element.payload, fixed_payload))
            key = outcome_fingerprint(combo)
            if key not in seen:
                seen.add(key)
                combos.append(combo)
    combo_fixed = [Proj(Proj(Var("x"), 1), m) for m in range(len(fixed_idx))]
    back_args: List[Term] = []
    fixed_iter = iter(combo_fixed)
    for k in range(arity):
        back_args.append(Var("i2") if k == inv_index else next(fixed_iter))
    backward = ForAll(
        "x",
        ExplicitDomain(combos),
        ForAll(
            "i2",
            Call(q, [Proj(Var("x"), 0), *combo_fixed]),
            In(Proj(Var("x"), 0), Call(p, back_args)),
            label="dir2/preimage",
        ),
        label="dir2",
    )
    return And(forward, backward)


def _fwd_enum_property(
    p: CandidateProgram,
    q: CandidateProgram,
    test_inputs: TestInputSet,
) -> Term:
    arity = _arity(test_inputs)
    p_args = _arg_terms("i", arity)
    return ForAll(
        "i",
        ExplicitDomain(_binder_values(test_inputs)),
        In(Call(p, p_args), Call(q, p_args)),
        label="membership",
    )


def pointwise_inputs(test_inputs: TestInputSet) -> TestInputSet:
    """Element-level inputs of a stream-level input set."""
    if _arity(test_inputs) != 1:
        raise SchemeMismatchError("stream problems take a single sequence argument")
    elements = []
    for (seq,) in test_inputs.inputs:
        if not isinstance(seq.payload, (list, tuple)):
            raise SchemeMismatchError("stream inputs must be sequences")
        elements.extend((Normal(e),) for e in seq.payload)
    return TestInputSet(
        test_inputs.problem_id + "#pointwise", tuple(elements), test_inputs.provenance
    )


def stream_lift(p: CandidateProgram) -> CandidateProgram:
    """Pointwise view of a stream candidate: run on [i], take the head."""

    def compute(args: tuple, executor: Executor) -> Value:
        (item,) = args
        if not isinstance(item, Normal):
            return DEMONIC
        out = executor.execute(p, (Normal([item.payload]),)).value
        if isinstance(out, Special):
            return out
        if isinstance(out, Normal) and isinstance(out.payload, (list, tuple)) and out.payload:
            return Normal(out.payload[0])
        return DEMONIC

    return CandidateProgram(
        f"{p.id}.pointwise",
        f"{p.problem_id}#pointwise",
        Derived(compute, f"head({p.id}([i]))"),
    )


def compose_union_inverse(branches: Dict[str, CandidateProgram]) -> CandidateProgram:
    """Dispatch on the output-valued argument's constructor tag.

    The none branch drops the payload argument; any other tag forwards all
    arguments. An unregistered tag at call time is demonic.
    """
    if not branches:
        raise ValueError("composition needs at least one branch")

    def compute(args: tuple, executor: Executor) -> Value:
        if not args:
            return DEMONIC
        head = args[0]
        tag = "none" if isinstance(head, Normal) and head.payload is None else "some"
        branch = branches.get(tag)
        if branch is None:
            return DEMONIC
        forwarded = args[1:] if tag == "none" else args
        return executor.execute(branch, forwarded).value

    ids = ",".join(f"{tag}={c.id}" for tag, c in sorted(branches.items()))
    problem_id = next(iter(branches.values())).problem_id
    return CandidateProgram(f"compose({ids})", problem_id, Derived(compute, ids))


def build_property(
    scheme: Scheme,
    p: CandidateProgram,
    q: CandidateProgram,
    test_inputs: TestInputSet,
    observations: Sequence[Observation],
    include_bijection: bool = True,
) -> Term:
    """Closed property term for the scheme over the given test inputs.

    observations are (args, output) pairs of p on test_inputs — for a stream
    scheme, of the lifted candidate on the element-level inputs — optionally
    extended with extra observed pairs; injectivity, disjointness and
    reverse-containment clauses quantify over them.
    """
    if isinstance(scheme, Stream):
        lifted = stream_lift(p)
        inner_inputs = pointwise_inputs(test_inputs)
        inner = build_property(
            scheme.inner, lifted, q, inner_inputs, observations, include_bijection
        )
        consistency = ForAll(
            "xs",
            ExplicitDomain(_binder_values(test_inputs)),
            Eq(Call(p, [Var("xs")]), MapSeq(lifted, Var("xs"))),
            label="pointwise-consistency",
        )
        return And(inner, consistency)

    arity = _arity(test_inputs)
    inv_index = _inverted_index(scheme, arity)
    if isinstance(scheme, (FullFwdInv, PartialFwdInv)):
        return _fwd_inv_property(
            p, q, test_inputs, observations, inv_index, include_bijection
        )
    if isinstance(scheme, (FullFwdSinv, PartialFwdSinv)):
        return _fwd_sinv_property(
            p, q, test_inputs, observations, inv_index, include_bijection
        )
    if isinstance(scheme, (FullEnumSinv, PartialEnumSinv)):
        return _enum_sinv_property(
            p, q, test_inputs, observations, inv_index, include_bijection
        )
    if isinstance(scheme, FwdEnum):
        return _fwd_enum_property(p, q, test_inputs)
    raise SchemeMismatchError(f"unknown scheme {scheme!r}")


def observe(
    scheme: Scheme,
    p: CandidateProgram,
    test_inputs: TestInputSet,
    executor: Executor,
) -> List[Observation]:
    """Observed (args, output) pairs the property builder quantifies over."""
    if isinstance(scheme, Stream):
        lifted = stream_lift(p)
        inner = pointwise_inputs(test_inputs)
        return [(args, executor.execute(lifted, args).value) for args in inner.inputs]
    return [(args, executor.execute(p, args).value) for args in test_inputs.inputs]


def check_agreement(
    scheme: Scheme,
    p: CandidateProgram,
    q: CandidateProgram,
    test_inputs: TestInputSet,
    cfg: Optional[EvalConfig] = None,
    executor: Optional[Executor] = None,
    extra_observations: Sequence[Observation] = (),
    include_bijection: bool = True,
) -> AgreementVerdict:
    """Evaluate the scheme's property over a program/witness pair."""
    cfg = cfg or EvalConfig()
    own = executor is None
    executor = executor or Executor(cfg.execution)
    try:
        observations = observe(scheme, p, test_inputs, executor)
        observations.extend(extra_observations)
        term = build_property(scheme, p, q, test_inputs, observations, include_bijection)
        result = eval_term(term, {}, cfg, executor)
    finally:
        if own:
            executor.close()
    return _verdict_from(result)


def _verdict_from(result: EvalResult) -> AgreementVerdict:
    agrees = result.value is True
    counterexample = None
    if not agrees:
        failing = [s for s in result.forall_stats if not s.verdict]
        top = [s for s in failing if s.label and "/" not in s.label]
        pick = (top or failing or [None])[0]
        if pick is not None:
            counterexample = (pick.label or "forall", pick.first_violation)
    return AgreementVerdict(agrees, counterexample, tuple(result.forall_stats))


@dataclass
class CascadeResult:
    surviving_forward: list
    surviving_enumerators: list
    log: list = field(default_factory=list)


def cascade_enum_sinv(
    forward_samples: Sequence[CandidateProgram],
    enum_samples: Sequence[CandidateProgram],
    sinv_samples: Sequence[CandidateProgram],
    test_inputs: TestInputSet,
    cfg: Optional[EvalConfig] = None,
    *,
    partial_arg: Optional[int] = None,
    stream: bool = False,
    executor: Optional[Executor] = None,
) -> CascadeResult:
    """Two-stage consensus: enumerators vs set-valued inverses, then forwards.

    Stage 1 marks enumerator/inverse pairs that agree; stage 2 keeps forward
    samples whose outputs are members of at least one surviving enumerator's
    output set.
    """
    if not (forward_samples and enum_samples and sinv_samples):
        raise ValueError("cascade requires non-empty sample lists")
    cfg = cfg or EvalConfig()
    own = executor is None
    executor = executor or Executor(cfg.execution)
    try:
        stage1_scheme: Scheme = (
            PartialEnumSinv(partial_arg) if partial_arg is not None else FullEnumSinv()
        )
        stage2_scheme: Scheme = Stream(FwdEnum()) if stream else FwdEnum()
        stage1_inputs = pointwise_inputs(test_inputs) if stream else test_inputs

        # Forward outputs widen the reverse-containment domain of stage 1.
        forward_views = [stream_lift(f) for f in forward_samples] if stream else forward_samples
        fwd_observations: List[Observation] = []
        seen = set()
        for f in forward_views:
            for args in stage1_inputs.inputs:
                out = executor.execute(f, args).value
                if isinstance(out, Special):
                    continue
                key = (args_key(args), outcome_fingerprint(out))
                if key not in seen:
                    seen.add(key)
                    fwd_observations.append((args, out))

        log: List[VerdictRecord] = []
        surviving_enums: List[CandidateProgram] = []
        for e in enum_samples:
            agreed = False
            for s in sinv_samples:
                verdict = check_agreement(
                    stage1_scheme, e, s, stage1_inputs, cfg, executor,
                    extra_observations=fwd_observations,
                )
                log.append(
                    VerdictRecord(
                        test_inputs.problem_id,
                        scheme_name(stage1_scheme),
                        e.id,
                        s.id,
                        verdict.agrees,
                        verdict.counterexample[0] if verdict.counterexample else None,
                    )
                )
                agreed = agreed or verdict.agrees
            if agreed:
                surviving_enums.append(e)

        surviving_forward: List[CandidateProgram] = []
        for f in forward_samples:
            agreed = False
            for e in surviving_enums:
                verdict = check_agreement(stage2_scheme, f, e, test_inputs, cfg, executor)
                log.append(
                    VerdictRecord(
                        test_inputs.problem_id,
                        scheme_name(stage2_scheme),
                        f.id,
                        e.id,
                        verdict.agrees,
                        verdict.counterexample[0] if verdict.counterexample else None,
                    )
                )
                agreed = agreed or verdict.agrees
            if agreed:
                surviving_forward.append(f)
        return CascadeResult(surviving_forward, surviving_enums, log)
    finally:
        if own:
            executor.close()
