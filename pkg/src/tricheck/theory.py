"""Synthetic stochastic-parrot models and numerical checks of the theory.

A model holds hallucination classes of problems that share one distribution
over program equivalence classes. Within a class, a fixed-point-free
permutation of the problems induces a fixed-point-free permutation of the
program-class indices that maps correct indices to correct indices. The
closed forms compare the probability of correctness conditioned on agreement
for plain equivalence (pi_c^2 / sum pi_i^2) against the transformed pairing
(pi_c * pi_sigma(c) / sum pi_i * pi_sigma(i)).
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np


@dataclass(frozen=True)
class HallucinationClass:
    problem_ids: tuple
    pi: tuple  # probability per program-class index, Fractions summing to 1
    correct_index: Dict[str, tuple]  # problem id -> correct indices
    tau: Dict[str, str]  # fixed-point-free permutation of problem ids
    sigma: tuple  # induced permutation of program-class indices

    @property
    def num_program_classes(self) -> int:
        return len(self.pi)

    def correct_set(self) -> frozenset:
        return frozenset(i for ids in self.correct_index.values() for i in ids)


@dataclass(frozen=True)
class ParrotModel:
    classes: tuple

    @property
    def num_problems(self) -> int:
        return sum(len(h.problem_ids) for h in self.classes)


class ModelInvariantError(Exception):
    pass


def validate_model(model: ParrotModel) -> None:
    for h in model.classes:
        if len(h.problem_ids) < 2:
            raise ModelInvariantError("hallucination classes need >= 2 problems")
        if sum(h.pi) != 1:
            raise ModelInvariantError("pi must sum to 1")
        if any(p <= 0 for p in h.pi):
            raise ModelInvariantError("pi entries must be positive")
        correct = h.correct_set()
        errors = [h.pi[i] for i in range(len(h.pi)) if i not in correct]
        if len(set(errors)) != len(errors):
            raise ModelInvariantError("error probabilities must be pairwise distinct")
        if any(h.tau[d] == d for d in h.problem_ids):
            raise ModelInvariantError("tau must have no fixed points")
        if sorted(h.tau.values()) != sorted(h.problem_ids):
            raise ModelInvariantError("tau must permute the class's problems")
        n = len(h.pi)
        if sorted(h.sigma) != list(range(n)):
            raise ModelInvariantError("sigma must be a permutation of the indices")
        if any(h.sigma[i] == i for i in range(n)):
            raise ModelInvariantError("sigma must have no fixed points")
        for d in h.problem_ids:
            image = {h.sigma[i] for i in h.correct_index[d]}
            if image != set(h.correct_index[h.tau[d]]):
                raise ModelInvariantError(
                    "sigma must map correct indices onto the transformed problem's"
                )


# --- closed forms -----------------------------------------------------------


def plurality_confidence(pi: Sequence[Fraction], correct: Sequence[int]) -> Fraction:
    """Sum over correct indices of pi_c^2, over sum of all pi_i^2."""
    denom = sum((Fraction(p) ** 2 for p in pi), Fraction(0))
    num = sum((Fraction(pi[c]) ** 2 for c in correct), Fraction(0))
    return num / denom


def triangulation_confidence(
    pi: Sequence[Fraction], sigma: Sequence[int], correct: Sequence[int]
) -> Fraction:
    """Sum over correct indices of pi_c*pi_sigma(c), over sum pi_i*pi_sigma(i)."""
    denom = sum((Fraction(pi[i]) * Fraction(pi[sigma[i]]) for i in range(len(pi))), Fraction(0))
    num = sum((Fraction(pi[c]) * Fraction(pi[sigma[c]]) for c in correct), Fraction(0))
    return num / denom


def problem_delta(pi: Sequence[Fraction], sigma: Sequence[int], correct: Sequence[int]) -> Fraction:
    return triangulation_confidence(pi, sigma, correct) - plurality_confidence(pi, correct)


def class_expected_delta(h: HallucinationClass) -> Fraction:
    """Average confidence gain over the problems of one hallucination class."""
    total = Fraction(0)
    for d in h.problem_ids:
        total += problem_delta(h.pi, h.sigma, h.correct_index[d])
    return total / len(h.problem_ids)


def expected_delta(model: ParrotModel) -> Fraction:
    """Confidence gain averaged uniformly over all problems of the model."""
    total = Fraction(0)
    for h in model.classes:
        for d in h.problem_ids:
            total += problem_delta(h.pi, h.sigma, h.correct_index[d])
    return total / model.num_problems


def rearrangement_check(
    pi: Sequence[Fraction], sigma: Sequence[int]
) -> Tuple[Fraction, Fraction, bool]:
    """(sum pi_i^2, sum pi_i*pi_sigma(i), strictness guarantee).

    The left side always dominates the right. The returned flag classifies
    when strictness is guaranteed: all entries distinct and sigma without
    fixed points. Equality can still fail to be strict outside that regime.
    """
    lhs = sum((Fraction(p) ** 2 for p in pi), Fraction(0))
    rhs = sum((Fraction(pi[i]) * Fraction(pi[sigma[i]]) for i in range(len(pi))), Fraction(0))
    distinct = len(set(pi)) == len(list(pi))
    derangement = all(sigma[i] != i for i in range(len(sigma)))
    return lhs, rhs, distinct and derangement


def dissociative_check(
    pi: Sequence[Fraction],
    sigma: Sequence[int],
    correct: Sequence[int],
    errors: Sequence[int],
) -> bool:
    """Normalized correct-probability drift strictly below the error drift."""
    correct = list(correct)
    errors = list(errors)
    if not correct or not errors:
        raise ValueError("both index sets must be non-empty")
    if sorted(correct + errors) != list(range(len(pi))):
        raise ValueError("correct and error sets must partition the indices")
    c_norm = sum((Fraction(pi[c]) ** 2 for c in correct), Fraction(0))
    b_norm = sum((Fraction(pi[b]) ** 2 for b in errors), Fraction(0))
    lhs = sum(((Fraction(pi[c]) - Fraction(pi[sigma[c]])) ** 2 for c in correct), Fraction(0)) / c_norm
    rhs = sum(((Fraction(pi[b]) - Fraction(pi[sigma[b]])) ** 2 for b in errors), Fraction(0)) / b_norm
    return lhs < rhs


def model_dissociative(model: ParrotModel) -> bool:
    for h in model.classes:
        correct = sorted(h.correct_set())
        errors = [i for i in range(h.num_program_classes) if i not in h.correct_set()]
        if not dissociative_check(h.pi, h.sigma, correct, errors):
            return False
    return True


# --- Monte-Carlo estimation ---------------------------------------------------


@dataclass(frozen=True)
class MonteCarloEstimate:
    delta: float
    stderr: float
    widened: bool  # some conditioning cell was empty


def monte_carlo_delta(
    model: ParrotModel, trials: int, seed: int = 0
) -> MonteCarloEstimate:
    """Estimate the confidence gain by sampling class indices per problem.

    For each problem, draws (p, q) for the plain-agreement cell and (p, q')
    for the transformed cell, conditioning on p == q and q' == sigma(p)
    respectively; the gain is the difference of the conditional frequencies
    of p landing on a correct index, averaged over problems.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    deltas: List[float] = []
    variances: List[float] = []
    widened = False
    for h in model.classes:
        probs = np.array([float(p) for p in h.pi])
        probs = probs / probs.sum()
        n = len(probs)
        sigma = np.array(h.sigma)
        for d in h.problem_ids:
            correct = np.zeros(n, dtype=bool)
            correct[list(h.correct_index[d])] = True
            p_draw = rng.choice(n, size=trials, p=probs)
            q_draw = rng.choice(n, size=trials, p=probs)
            qp_draw = rng.choice(n, size=trials, p=probs)
            plain_mask = p_draw == q_draw
            tri_mask = qp_draw == sigma[p_draw]
            cells = []
            for mask in (tri_mask, plain_mask):
                m = int(mask.sum())
                if m == 0:
                    widened = True
                    cells.append(None)
                    continue
                frac = float(correct[p_draw[mask]].mean())
                cells.append((frac, frac * (1 - frac) / m))
            if cells[0] is None or cells[1] is None:
                continue
            deltas.append(cells[0][0] - cells[1][0])
            variances.append(cells[0][1] + cells[1][1])
    if not deltas:
        return MonteCarloEstimate(0.0, float("inf"), True)
    estimate = sum(deltas) / len(deltas)
    stderr = (sum(variances)) ** 0.5 / len(deltas)
    return MonteCarloEstimate(estimate, stderr, widened)


# --- model generation ---------------------------------------------------------


@dataclass(frozen=True)
class ModelSpec:
    num_hallucination_classes: int = 2
    problems_per_class: int = 2
    num_program_classes: int = 6
    correct_per_problem: int = 1
    profile: str = "equal-correct"  # or "dissociative"

    def __post_init__(self) -> None:
        if self.problems_per_class < 2:
            raise ValueError("problems_per_class must be >= 2")
        needed = self.problems_per_class * self.correct_per_problem
        if self.num_program_classes < needed + 2:
            raise ValueError(
                "num_program_classes must leave at least two error classes"
            )
        if self.profile not in ("equal-correct", "dissociative"):
            raise ValueError(f"unknown profile {self.profile!r}")


def _derangement(items: List, rng: random.Random) -> List:
    while True:
        shuffled = items[:]
        rng.shuffle(shuffled)
        if all(a != b for a, b in zip(items, shuffled)):
            return shuffled


def _distinct_weights(count: int, rng: random.Random, lo: int = 1, hi: int = 10_000) -> List[int]:
    weights: List[int] = []
    seen = set()
    while len(weights) < count:
        w = rng.randint(lo, hi)
        if w not in seen:
            seen.add(w)
            weights.append(w)
    return weights


def random_model(spec: ModelSpec, seed: int) -> ParrotModel:
    """Deterministic-per-seed model satisfying all the invariants."""
    rng = random.Random(seed)
    classes = []
    n = spec.num_program_classes
    for h_idx in range(spec.num_hallucination_classes):
        problem_ids = tuple(f"h{h_idx}.d{k}" for k in range(spec.problems_per_class))
        k = spec.problems_per_class
        m = spec.correct_per_problem
        correct_indices = list(range(k * m))
        error_indices = list(range(k * m, n))
        correct_index = {
            d: tuple(correct_indices[j * m : (j + 1) * m]) for j, d in enumerate(problem_ids)
        }

        tau_order = _derangement(list(problem_ids), rng)
        tau = dict(zip(problem_ids, tau_order))

        # sigma: block of d maps onto block of tau(d); errors get a derangement
        sigma = [0] * n
        for d in problem_ids:
            src = correct_index[d]
            dst = correct_index[tau[d]]
            for a, b in zip(src, dst):
                sigma[a] = b
        for a, b in zip(error_indices, _derangement(error_indices, rng)):
            sigma[a] = b

        for attempt in range(1000):
            error_weights = _distinct_weights(len(error_indices), rng)
            if spec.profile == "equal-correct":
                base = rng.randint(1, 10_000)
                correct_weights = [base] * len(correct_indices)
            else:
                correct_weights = [rng.randint(1, 10_000) for _ in correct_indices]
            weights = [0] * n
            for i, w in zip(correct_indices, correct_weights):
                weights[i] = w
            for i, w in zip(error_indices, error_weights):
                weights[i] = w
            total = sum(weights)
            pi = tuple(Fraction(w, total) for w in weights)
            errors_pi = [pi[i] for i in error_indices]
            if len(set(errors_pi)) != len(errors_pi):
                continue
            if spec.profile == "dissociative":
                if not dissociative_check(pi, sigma, correct_indices, error_indices):
                    continue
            break
        else:
            raise ModelInvariantError("could not generate a model for this spec")

        classes.append(
            HallucinationClass(problem_ids, pi, correct_index, tau, tuple(sigma))
        )
    model = ParrotModel(tuple(classes))
    validate_model(model)
    return model


@dataclass(frozen=True)
class SimulationReport:
    models: int
    trials: int
    seed: int
    min_delta: Fraction
    all_positive: bool
    rearrangement_ok: bool
    dissociative_positive: bool
    mc_within_three_se: bool
    mc_rows: tuple = ()


def simulate(
    models: int = 1000,
    trials: int = 100_000,
    seed: int = 0,
    spec: Optional[ModelSpec] = None,
    mc_models: int = 10,
) -> SimulationReport:
    """Run the numerical checks backing the theory claims."""
    base = spec or ModelSpec()
    min_delta: Optional[Fraction] = None
    rearrangement_ok = True
    all_positive = True
    for i in range(models):
        model = random_model(base, seed + i)
        delta = expected_delta(model)
        min_delta = delta if min_delta is None or delta < min_delta else min_delta
        if delta <= 0:
            all_positive = False
        for h in model.classes:
            lhs, rhs, strict = rearrangement_check(h.pi, h.sigma)
            if lhs < rhs or (strict and lhs == rhs):
                rearrangement_ok = False

    dspec = ModelSpec(
        base.num_hallucination_classes,
        base.problems_per_class,
        base.num_program_classes,
        base.correct_per_problem,
        "dissociative",
    )
    dissociative_positive = True
    for i in range(models):
        model = random_model(dspec, 10_000_000 + seed + i)
        if not model_dissociative(model):  # generator guarantees it; double check
            dissociative_positive = False
        if expected_delta(model) <= 0:
            dissociative_positive = False

    mc_ok = True
    mc_rows = []
    for i in range(mc_models):
        model = random_model(base, 20_000_000 + seed + i)
        exact = float(expected_delta(model))
        est = monte_carlo_delta(model, trials, seed=seed + i)
        within = est.widened is False and abs(est.delta - exact) <= 3 * est.stderr
        mc_rows.append((exact, est.delta, est.stderr, within))
        if not within:
            mc_ok = False

    return SimulationReport(
        models=models,
        trials=trials,
        seed=seed,
        min_delta=min_delta if min_delta is not None else Fraction(0),
        all_positive=all_positive,
        rearrangement_ok=rearrangement_ok,
        dissociative_positive=dissociative_positive,
        mc_within_three_se=mc_ok,
        mc_rows=tuple(mc_rows),
    )
