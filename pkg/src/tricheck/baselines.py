"""Agreement checks for witness baselines: tests, postconditions, equivalence."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .evaluator import EvalConfig, eval_term
from .harness import Executor
from .problems import CandidateProgram, TestInputSet
from .terms import Call, Const, Eq, ExplicitDomain, ForAll, Proj, Tolerate, Var
from .values import Normal, outcome_fingerprint


@dataclass(frozen=True)
class TestWitnessCandidate:
    """One assertion-style test: a fixed input, a predicate over (args, out)."""

    candidate: CandidateProgram
    input_args: tuple


def _predicate_clause(p: CandidateProgram, q: CandidateProgram, arity: int):
    if arity == 1:
        p_args = [Var("i")]
    else:
        p_args = [Proj(Var("i"), k) for k in range(arity)]
    return Eq(Call(q, [*p_args, Tolerate(Call(p, p_args))]), Const(Normal(True)))


def _domain(inputs: Sequence[tuple]) -> ExplicitDomain:
    arity = len(inputs[0])
    if arity == 1:
        return ExplicitDomain([args[0] for args in inputs])
    return ExplicitDomain([Normal(tuple(a.payload for a in args)) for args in inputs])


def check_postcondition_agreement(
    p: CandidateProgram,
    q: CandidateProgram,
    test_inputs: TestInputSet,
    cfg: Optional[EvalConfig] = None,
    executor: Optional[Executor] = None,
) -> bool:
    """The predicate holds over every test input, angelic slack included."""
    cfg = cfg or EvalConfig()
    arity = len(test_inputs.inputs[0])
    term = ForAll(
        "i",
        _domain(test_inputs.inputs),
        _predicate_clause(p, q, arity),
        label="postcondition",
    )
    return eval_term(term, {}, cfg, executor).value is True


def check_test_agreement(
    p: CandidateProgram,
    witness: TestWitnessCandidate,
    cfg: Optional[EvalConfig] = None,
    executor: Optional[Executor] = None,
) -> bool:
    """The test's predicate holds on its own fixed input."""
    cfg = cfg or EvalConfig()
    arity = len(witness.input_args)
    term = ForAll(
        "i",
        _domain([witness.input_args]),
        _predicate_clause(p, witness.candidate, arity),
        label="test",
    )
    return eval_term(term, {}, cfg, executor).value is True


def check_equivalence_agreement(
    p: CandidateProgram,
    q: CandidateProgram,
    test_inputs: TestInputSet,
    cfg: Optional[EvalConfig] = None,
    executor: Optional[Executor] = None,
) -> bool:
    """Outcome vectors match over the shared inputs (specials by kind)."""
    cfg = cfg or EvalConfig()
    own = executor is None
    executor = executor or Executor(cfg.execution)
    try:
        for args in test_inputs.inputs:
            left = executor.execute(p, args).value
            right = executor.execute(q, args).value
            if outcome_fingerprint(left) != outcome_fingerprint(right):
                return False
        return True
    finally:
        if own:
            executor.close()
