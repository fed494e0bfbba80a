import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tricheck.consensus import (
    Abstained,
    AgreementMatrix,
    Selected,
    cluster,
    decide_pipeline,
    majority,
    plurality,
    ransac,
    ransac_oracle_score,
)
from tricheck.problems import (
    TestInputSet,
    candidate_from_fn,
    fixture_candidate,
)
from tricheck.values import DEMONIC, Normal, full_set


def unary_inputs(lo=0, hi=9, pid="p"):
    return TestInputSet(pid, tuple((Normal(i),) for i in range(lo, hi + 1)))


def fn_candidate(cid, fn, pid="p", rng=range(-20, 21)):
    return candidate_from_fn(cid, pid, fn, [(Normal(i),) for i in rng])


def eq_class(class_id, size, total):
    from tricheck.consensus import EquivalenceClass

    return EquivalenceClass(
        tuple(f"{class_id}-{i}" for i in range(size)), class_id, {}, Fraction(size, total)
    )


# --- clustering -----------------------------------------------------------------


def test_cluster_identical_candidates_one_class():
    a = fn_candidate("a", lambda v: Normal(v.payload + 1))
    b = fn_candidate("b", lambda v: Normal(v.payload + 1))
    classes = cluster([a, b], unary_inputs())
    assert len(classes) == 1
    assert classes[0].mass == 1
    assert classes[0].representative == "a"


def test_cluster_distinct_behaviors_split():
    a = fn_candidate("a", lambda v: Normal(v.payload + 1))
    b = fn_candidate("b", lambda v: Normal(v.payload + 2))
    classes = cluster([a, b], unary_inputs())
    assert len(classes) == 2


def test_cluster_special_outcomes_split_classes():
    table_ok = [((Normal(i),), Normal(i + 1)) for i in range(10)]
    table_bad = [((Normal(i),), Normal(i + 1)) for i in range(10)]
    table_bad[3] = ((Normal(3),), DEMONIC)
    a = fixture_candidate("a", "p", table_ok)
    b = fixture_candidate("b", "p", table_bad)
    classes = cluster([a, b], unary_inputs())
    assert len(classes) == 2


def test_cluster_mass_conservation_and_permutation_invariance():
    rng = random.Random(7)
    candidates = []
    for i in range(30):
        delta = rng.choice([0, 1, 1, 2, 5])
        candidates.append(fn_candidate(f"c{i:02d}", lambda v, d=delta: Normal(v.payload + d)))
    classes = cluster(candidates, unary_inputs())
    assert sum(c.mass for c in classes) == 1
    shuffled = candidates[:]
    rng.shuffle(shuffled)
    classes2 = cluster(shuffled, unary_inputs())
    assert [c.representative for c in classes] == [c.representative for c in classes2]
    assert plurality(classes).class_id == plurality(classes2).class_id


# --- plurality / majority ---------------------------------------------------------


def test_plurality_selects_dominant_mass():
    classes = [eq_class("a", 23, 100), eq_class("b", 7, 100), eq_class("c", 70, 100)]
    assert plurality(classes).class_id == "c"


def test_plurality_single_class():
    assert plurality([eq_class("a", 5, 5)]).class_id == "a"


def test_plurality_tie_breaks_to_smaller_id():
    classes = [eq_class("b", 5, 10), eq_class("a", 5, 10)]
    assert plurality(classes).class_id == "a"


def test_plurality_empty_rejected():
    with pytest.raises(ValueError):
        plurality([])


def test_majority_selects_above_threshold():
    classes = [eq_class("a", 6, 10), eq_class("b", 4, 10)]
    decision = majority(classes)
    assert isinstance(decision, Selected) and decision.class_id == "a"


def test_majority_abstains_without_majority():
    classes = [eq_class("a", 4, 10), eq_class("b", 3, 10), eq_class("c", 3, 10)]
    decision = majority(classes)
    assert isinstance(decision, Abstained)
    assert decision.reason == "no majority"


def test_majority_tie_at_exact_threshold_selects():
    classes = [eq_class("b", 5, 10), eq_class("a", 5, 10)]
    decision = majority(classes)
    assert isinstance(decision, Selected) and decision.class_id == "a"


# --- ransac -------------------------------------------------------------------------


def matrix_of(rows, program_ids=None, witness_ids=None):
    program_ids = program_ids or [f"p{i}" for i in range(len(rows))]
    witness_ids = witness_ids or [f"w{j}" for j in range(len(rows[0]) if rows else 0)]
    return AgreementMatrix(tuple(program_ids), tuple(witness_ids), tuple(tuple(r) for r in rows))


def test_ransac_all_false_abstains():
    m = matrix_of([[False, False], [False, False]])
    decision = ransac(m, {"p0": 1, "p1": 1}, {"w0": 1, "w1": 1})
    assert isinstance(decision, Abstained)
    assert decision.reason == "no agreeing witness"


def test_ransac_identical_rows_pool_sizes():
    m = matrix_of([[True, False], [True, False], [False, True]])
    decision = ransac(m, {"p0": 2, "p1": 3, "p2": 4}, {"w0": 1, "w1": 1})
    # rows p0,p1 share {w0}: pooled 5 * 1 = 5 beats p2's 4 * 1; within the
    # pooled group the larger class wins the tie-break
    assert decision.class_id == "p1"
    assert decision.score == 5
    oracle = ransac_oracle_score(m.cells, [2, 3, 4], [1, 1])
    assert oracle == 5


def test_ransac_matches_oracle_exhaustively_small():
    for rows in range(1, 4):
        for cols in range(1, 4):
            for bits in range(1 << (rows * cols)):
                cells = [
                    [bool(bits >> (r * cols + c) & 1) for c in range(cols)]
                    for r in range(rows)
                ]
                m = matrix_of(cells)
                sizes = {f"p{i}": 1 for i in range(rows)}
                wsizes = {f"w{j}": 1 for j in range(cols)}
                decision = ransac(m, sizes, wsizes)
                oracle = ransac_oracle_score(cells)
                if oracle == 0:
                    assert isinstance(decision, Abstained)
                else:
                    assert isinstance(decision, Selected)
                    assert decision.score == oracle


def test_ransac_matches_oracle_random_6x6():
    rng = random.Random(99)
    for _ in range(300):
        rows = rng.randint(1, 6)
        cols = rng.randint(1, 6)
        cells = [[rng.random() < 0.4 for _ in range(cols)] for _ in range(rows)]
        sizes = {f"p{i}": rng.randint(1, 9) for i in range(rows)}
        wsizes = {f"w{j}": rng.randint(1, 9) for j in range(cols)}
        m = matrix_of(cells)
        decision = ransac(m, sizes, wsizes)
        oracle = ransac_oracle_score(
            cells, [sizes[f"p{i}"] for i in range(rows)], [wsizes[f"w{j}"] for j in range(cols)]
        )
        if oracle == 0:
            assert isinstance(decision, Abstained)
        else:
            assert decision.score == oracle


def test_ransac_dimension_mismatch_rejected():
    m = matrix_of([[True]])
    with pytest.raises(ValueError):
        ransac(m, {}, {"w0": 1})


@given(st.lists(st.integers(min_value=1, max_value=20), min_size=1, max_size=8))
@settings(max_examples=60)
def test_plurality_is_ransac_with_self_witnesses(sizes):
    total = sum(sizes)
    classes = [eq_class(f"c{i}", s, total) for i, s in enumerate(sizes)]
    # witnesses are the programs themselves; agreement is class identity
    n = len(sizes)
    cells = [[i == j for j in range(n)] for i in range(n)]
    m = matrix_of(cells, [c.class_id for c in classes], [c.class_id for c in classes])
    size_map = {c.class_id: c.size for c in classes}
    r = ransac(m, size_map, size_map)
    p = plurality(classes)
    assert isinstance(r, Selected)
    assert r.class_id == p.class_id


# --- pipeline ordering -----------------------------------------------------------------


def _toy_samples():
    forwards = [
        fn_candidate("f-plus1", lambda v: Normal(v.payload + 1)),
        fn_candidate("f-minus", lambda v: Normal(v.payload - 1)),
    ]
    sinvs = [
        candidate_from_fn(
            "s-good",
            "p#sinv",
            lambda o: full_set([Normal(o.payload - 1)]),
            [(Normal(i),) for i in range(-25, 25)],
        )
    ]
    return forwards, sinvs


def test_pipeline_falls_back_to_fwd_sinv_when_no_enum():
    forwards, sinvs = _toy_samples()
    decision = decide_pipeline(forwards, [], sinvs, unary_inputs())
    assert isinstance(decision, Selected)
    assert decision.strategy == "full-fwd-sinv"
    assert decision.class_id == "f-plus1"


def test_pipeline_uses_inverse_witnesses_last():
    forwards, _ = _toy_samples()
    invs = [
        candidate_from_fn(
            "i-good",
            "p#inv",
            lambda o: Normal(o.payload - 1),
            [(Normal(i),) for i in range(-25, 25)],
        )
    ]
    decision = decide_pipeline(forwards, [], [], unary_inputs(), inv_samples=invs)
    assert isinstance(decision, Selected)
    assert decision.strategy == "full-fwd-inv"
    assert decision.class_id == "f-plus1"


def test_pipeline_abstains_when_all_fail():
    forwards, _ = _toy_samples()
    bad_sinv = [
        candidate_from_fn(
            "s-bad",
            "p#sinv",
            lambda o: full_set([Normal(o.payload + 9)]),
            [(Normal(i),) for i in range(-25, 25)],
        )
    ]
    decision = decide_pipeline(forwards, [], bad_sinv, unary_inputs())
    assert isinstance(decision, Abstained)
    assert decision.reason == "all schemes failed"


def test_pipeline_requires_forward_samples():
    with pytest.raises(ValueError):
        decide_pipeline([], [], [], unary_inputs())
