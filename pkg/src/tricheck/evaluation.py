"""Ground-truth judging, abstention metrics and semantic entropy."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Set, Tuple

from .consensus import ConsensusDecision, EquivalenceClass, Selected
from .values import Special, Value, outcome_fingerprint


class JudgeGapError(Exception):
    """The judge fixture does not cover an observed behavior."""


@dataclass(frozen=True)
class Judge:
    """Fixture-encoded correctness oracle for one problem.

    Either a set of accepted whole-behavior fingerprints, or a table mapping
    each input key to the set of accepted output fingerprints.
    """

    problem_id: str
    accepted_fingerprints: Optional[frozenset] = None
    accepted_pairs: Optional[Mapping[bytes, frozenset]] = None

    def __post_init__(self) -> None:
        if (self.accepted_fingerprints is None) == (self.accepted_pairs is None):
            raise ValueError("judge needs exactly one of fingerprints or pairs")


def behavior_fingerprint(behavior: Mapping[bytes, Value]) -> bytes:
    parts = []
    for key in sorted(behavior):
        parts.append(key + b"=" + outcome_fingerprint(behavior[key]))
    return b";".join(parts)


def judge_class(judge: Judge, cls: EquivalenceClass) -> bool:
    """True iff every behavior entry is accepted; specials never are."""
    if any(isinstance(v, Special) for v in cls.behavior.values()):
        return False
    if judge.accepted_fingerprints is not None:
        return behavior_fingerprint(cls.behavior) in judge.accepted_fingerprints
    for key, out in cls.behavior.items():
        if key not in judge.accepted_pairs:
            raise JudgeGapError(
                f"judge for {judge.problem_id!r} does not cover input key {key!r}"
            )
        if outcome_fingerprint(out) not in judge.accepted_pairs[key]:
            return False
    return True


@dataclass(frozen=True)
class GroundTruth:
    solvable: bool
    correct_class_ids: frozenset = frozenset()


@dataclass(frozen=True)
class AbstentionCounts:
    n1: int = 0  # correct selections on solvable problems
    n2: int = 0  # incorrect selections on solvable problems
    n3: int = 0  # abstentions on solvable problems
    n4: int = 0  # selections on unsolvable problems
    n5: int = 0  # abstentions on unsolvable problems

    @property
    def total(self) -> int:
        return self.n1 + self.n2 + self.n3 + self.n4 + self.n5


def confusion(
    decisions: Sequence[Tuple[ConsensusDecision, GroundTruth]]
) -> AbstentionCounts:
    n = [0, 0, 0, 0, 0]
    for decision, truth in decisions:
        selected = isinstance(decision, Selected)
        if truth.solvable:
            if not selected:
                n[2] += 1
            elif decision.class_id in truth.correct_class_ids:
                n[0] += 1
            else:
                n[1] += 1
        else:
            if selected:
                n[3] += 1
            else:
                n[4] += 1
    return AbstentionCounts(*n)


@dataclass(frozen=True)
class MetricsReport:
    reliable_accuracy: Optional[Fraction]
    overall_accuracy: Optional[Fraction]
    abstention_rate: Optional[Fraction]
    precision_abs: Optional[Fraction]
    recall_abs: Optional[Fraction]
    f1_abs: Optional[Fraction]


def _ratio(num: int, den: int) -> Optional[Fraction]:
    if den == 0:
        return None  # 0/0 and n/0 are undefined, never reported as 0
    return Fraction(num, den)


def metrics(counts: AbstentionCounts) -> MetricsReport:
    n1, n2, n3, n4, n5 = counts.n1, counts.n2, counts.n3, counts.n4, counts.n5
    total = counts.total
    precision = _ratio(n5, n3 + n5)
    recall = _ratio(n5, n2 + n4 + n5)
    if precision is None or recall is None or precision + recall == 0:
        f1 = None
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return MetricsReport(
        reliable_accuracy=_ratio(n1, n1 + n2 + n4),
        overall_accuracy=_ratio(n1 + n5, total),
        abstention_rate=_ratio(n3 + n5, total),
        precision_abs=precision,
        recall_abs=recall,
        f1_abs=f1,
    )


@dataclass(frozen=True)
class AgreementOutcome:
    """One (program class, witness class) agreement check with ground truth."""

    program_class_id: str
    program_mass: Fraction
    witness_mass: Fraction
    agrees: bool
    program_correct: bool


@dataclass(frozen=True)
class CorrectnessUnderAgreement:
    conditional: Optional[Fraction]
    unconditional: Fraction


def correctness_under_agreement(
    pairs: Sequence[AgreementOutcome],
) -> CorrectnessUnderAgreement:
    """P(program correct | agreement), mass-weighted over class pairs.

    Also reports the unconditional correct mass (each program class counted
    once) for comparison. With no agreeing pair the conditional probability
    is undefined.
    """
    agree_mass = Fraction(0)
    agree_correct = Fraction(0)
    unconditional = Fraction(0)
    seen: Set[str] = set()
    for p in pairs:
        weight = p.program_mass * p.witness_mass
        if p.agrees:
            agree_mass += weight
            if p.program_correct:
                agree_correct += weight
        if p.program_class_id not in seen:
            seen.add(p.program_class_id)
            if p.program_correct:
                unconditional += p.program_mass
    conditional = None if agree_mass == 0 else agree_correct / agree_mass
    return CorrectnessUnderAgreement(conditional, unconditional)


def semantic_entropy(classes: Sequence[EquivalenceClass]) -> float:
    """Shannon entropy (natural log) of the class-mass distribution."""
    entropy = 0.0
    for cls in classes:
        m = float(cls.mass)
        if m > 0:
            entropy -= m * math.log(m)
    return entropy


def entropy_of_masses(masses: Sequence[float]) -> float:
    entropy = 0.0
    for m in masses:
        if m > 0:
            entropy -= m * math.log(m)
    return entropy


def entropy_by_prefix(labels: Sequence[str], step: int = 5) -> List[Tuple[int, float]]:
    """Semantic entropy of the first-k samples for k = step, 2*step, ..."""
    if step < 1:
        raise ValueError("step must be positive")
    out = []
    for k in range(step, len(labels) + 1, step):
        prefix = labels[:k]
        counts: Dict[str, int] = {}
        for label in prefix:
            counts[label] = counts.get(label, 0) + 1
        out.append((k, entropy_of_masses([c / k for c in counts.values()])))
    return out
