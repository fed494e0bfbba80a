import math
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from tricheck.consensus import Abstained, EquivalenceClass, Selected
from tricheck.evaluation import (
    AbstentionCounts,
    AgreementOutcome,
    GroundTruth,
    Judge,
    JudgeGapError,
    behavior_fingerprint,
    confusion,
    correctness_under_agreement,
    entropy_by_prefix,
    judge_class,
    metrics,
    semantic_entropy,
)
from tricheck.problems import args_key
from tricheck.values import DEMONIC, Normal, outcome_fingerprint


def eq_class(class_id, behavior, size=1, total=1):
    return EquivalenceClass(
        tuple(f"{class_id}.{i}" for i in range(size)),
        class_id,
        behavior,
        Fraction(size, total),
    )


def behavior_of(fn, inputs):
    return {args_key((Normal(i),)): fn(i) for i in inputs}


def pair_judge(accept_fn, inputs):
    pairs = {
        args_key((Normal(i),)): frozenset(
            outcome_fingerprint(v) for v in accept_fn(i)
        )
        for i in inputs
    }
    return Judge("p", accepted_pairs=pairs)


# --- judging -------------------------------------------------------------------


def test_judge_accepts_matching_behavior():
    judge = pair_judge(lambda i: [Normal(i + 1)], range(5))
    cls = eq_class("a", behavior_of(lambda i: Normal(i + 1), range(5)))
    assert judge_class(judge, cls)


def test_judge_rejects_any_demonic():
    judge = pair_judge(lambda i: [Normal(i + 1)], range(5))
    behavior = behavior_of(lambda i: Normal(i + 1), range(5))
    behavior[args_key((Normal(2),))] = DEMONIC
    assert not judge_class(judge, eq_class("a", behavior))


def test_judge_accepts_both_answers_on_loose_problem():
    judge = pair_judge(lambda i: [Normal(i + 1), Normal(i + 2)], range(5))
    plus1 = eq_class("a", behavior_of(lambda i: Normal(i + 1), range(5)))
    plus2 = eq_class("b", behavior_of(lambda i: Normal(i + 2), range(5)))
    assert judge_class(judge, plus1)
    assert judge_class(judge, plus2)


def test_judge_gap_is_hard_error():
    judge = pair_judge(lambda i: [Normal(i + 1)], range(3))
    cls = eq_class("a", behavior_of(lambda i: Normal(i + 1), range(5)))
    with pytest.raises(JudgeGapError):
        judge_class(judge, cls)


def test_judge_fingerprint_mode():
    behavior = behavior_of(lambda i: Normal(i + 1), range(3))
    judge = Judge("p", accepted_fingerprints=frozenset([behavior_fingerprint(behavior)]))
    assert judge_class(judge, eq_class("a", behavior))
    other = behavior_of(lambda i: Normal(i + 2), range(3))
    assert not judge_class(judge, eq_class("b", other))


# --- confusion ------------------------------------------------------------------


def sel(cid):
    return Selected(cid, cid, "s")


def abst():
    return Abstained("r", "s")


def test_confusion_example_rows():
    rows = [
        (sel("a"), GroundTruth(True, frozenset(["a"]))),   # correct selection
        (abst(), GroundTruth(True, frozenset(["a"]))),     # abstain on solvable
        (abst(), GroundTruth(False)),                      # abstain on unsolvable
    ]
    counts = confusion(rows)
    assert (counts.n1, counts.n2, counts.n3, counts.n4, counts.n5) == (1, 0, 1, 0, 1)


def test_confusion_all_unsolvable_abstain():
    rows = [(abst(), GroundTruth(False))] * 4
    assert confusion(rows).n5 == 4


def test_confusion_select_on_unsolvable_counts_n4():
    rows = [(sel("a"), GroundTruth(False))]
    assert confusion(rows).n4 == 1


@given(
    st.lists(
        st.tuples(st.booleans(), st.booleans(), st.booleans()), min_size=1, max_size=40
    )
)
def test_confusion_partitions(outcomes):
    rows = []
    for selected, solvable, correct in outcomes:
        truth = GroundTruth(solvable, frozenset(["a"]) if solvable else frozenset())
        decision = sel("a" if correct else "b") if selected else abst()
        rows.append((decision, truth))
    counts = confusion(rows)
    assert counts.total == len(rows)


# --- metrics ----------------------------------------------------------------------


def test_metrics_worked_example():
    counts = AbstentionCounts(2, 1, 0, 1, 1)
    report = metrics(counts)
    assert report.reliable_accuracy == Fraction(1, 2)
    assert report.overall_accuracy == Fraction(3, 5)
    assert report.abstention_rate == Fraction(1, 5)
    assert report.precision_abs == Fraction(1, 1)
    assert report.recall_abs == Fraction(1, 3)
    assert report.f1_abs == Fraction(1, 2)


def test_metrics_all_correct_no_abstentions():
    report = metrics(AbstentionCounts(5, 0, 0, 0, 0))
    assert report.reliable_accuracy == 1
    assert report.overall_accuracy == 1
    assert report.abstention_rate == 0


def test_metrics_zero_denominators_undefined():
    report = metrics(AbstentionCounts(5, 0, 0, 0, 0))
    assert report.precision_abs is None  # n3 + n5 == 0
    report = metrics(AbstentionCounts(0, 0, 0, 0, 0))
    assert report.overall_accuracy is None


@given(st.tuples(*[st.integers(min_value=0, max_value=30)] * 5))
def test_metrics_overall_recomputation(ns):
    counts = AbstentionCounts(*ns)
    report = metrics(counts)
    if counts.total:
        assert report.overall_accuracy == Fraction(counts.n1 + counts.n5, counts.total)
    else:
        assert report.overall_accuracy is None


# --- correctness under agreement ----------------------------------------------------


def test_agreeing_all_correct_is_one():
    pairs = [
        AgreementOutcome("a", Fraction(1, 2), Fraction(1, 4), True, True),
        AgreementOutcome("b", Fraction(1, 2), Fraction(1, 4), False, False),
    ]
    out = correctness_under_agreement(pairs)
    assert out.conditional == 1


def test_conditional_beats_unconditional_on_sparse_correct():
    # agreeing set is exactly the correct class of mass 0.07; total correct 0.14
    pairs = [
        AgreementOutcome("good1", Fraction(7, 100), Fraction(1, 2), True, True),
        AgreementOutcome("good2", Fraction(7, 100), Fraction(1, 2), False, True),
        AgreementOutcome("bad", Fraction(23, 100), Fraction(1, 2), False, False),
    ]
    out = correctness_under_agreement(pairs)
    assert out.conditional == 1
    assert out.unconditional == Fraction(14, 100)
    assert out.conditional > out.unconditional


def test_no_agreements_undefined():
    pairs = [AgreementOutcome("a", Fraction(1, 2), Fraction(1, 2), False, True)]
    assert correctness_under_agreement(pairs).conditional is None


# --- entropy -------------------------------------------------------------------------


def test_entropy_single_class_zero():
    classes = [eq_class("a", {}, 5, 5)]
    assert semantic_entropy(classes) == 0.0


def test_entropy_uniform_is_log_k():
    classes = [eq_class(f"c{i}", {}, 1, 4) for i in range(4)]
    assert abs(semantic_entropy(classes) - math.log(4)) < 1e-9


def test_entropy_worked_example():
    classes = [
        eq_class("a", {}, 5, 10),
        eq_class("b", {}, 3, 10),
        eq_class("c", {}, 2, 10),
    ]
    assert abs(semantic_entropy(classes) - 1.0297) < 1e-4


def test_entropy_bounds():
    classes = [eq_class("a", {}, 2, 6), eq_class("b", {}, 3, 6), eq_class("c", {}, 1, 6)]
    h = semantic_entropy(classes)
    assert 0 <= h <= math.log(3) + 1e-12


def test_entropy_by_prefix_matches_direct():
    labels = ["a", "a", "b", "c", "a", "b", "b", "c", "a", "a"]
    rows = entropy_by_prefix(labels, step=5)
    assert [k for k, _ in rows] == [5, 10]
    for k, h in rows:
        prefix = labels[:k]
        direct = 0.0
        for label in set(prefix):
            m = prefix.count(label) / k
            direct -= m * math.log(m)
        assert abs(h - direct) < 1e-12
