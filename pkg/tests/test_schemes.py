import pytest

from tricheck.evaluator import EvalConfig, eval_term
from tricheck.harness import Executor
from tricheck.problems import (
    TestInputSet,
    candidate_from_fn,
    fixture_candidate,
)
from tricheck.schemes import (
    FullEnumSinv,
    FullFwdInv,
    FullFwdSinv,
    PartialFwdSinv,
    SchemeMismatchError,
    Stream,
    cascade_enum_sinv,
    check_agreement,
    compose_union_inverse,
    pointwise_inputs,
    stream_lift,
)
from tricheck.terms import Call, Const, In
from tricheck.values import DEMONIC, UNDEFINED, Normal, full_set

RANGE = range(-30, 31)


def unary_inputs(lo=-10, hi=10, pid="toy"):
    return TestInputSet(pid, tuple((Normal(i),) for i in range(lo, hi + 1)))


def fn_candidate(cid, fn, pid="toy", rng=RANGE):
    return candidate_from_fn(cid, pid, fn, [(Normal(i),) for i in rng])


def plus1(cid="p"):
    return fn_candidate(cid, lambda v: Normal(v.payload + 1))


def identity(cid="idp"):
    return fn_candidate(cid, lambda v: Normal(v.payload))


def minus2(cid="q"):
    return fn_candidate(cid, lambda v: Normal(v.payload - 2), pid="toy#inv")


def minus1(cid="qi"):
    return fn_candidate(cid, lambda v: Normal(v.payload - 1), pid="toy#inv")


def sinv_full(cid="qs"):
    return fn_candidate(
        cid, lambda v: full_set([Normal(v.payload - 1), Normal(v.payload - 2)]), pid="toy#sinv"
    )


def enum_full(cid="e"):
    return fn_candidate(
        cid, lambda v: full_set([Normal(v.payload + 1), Normal(v.payload + 2)]), pid="toy#enum"
    )


def enum_missing(cid="em"):
    return fn_candidate(cid, lambda v: full_set([Normal(v.payload + 1)]), pid="toy#enum")


# --- FWD-INV --------------------------------------------------------------------


def test_fwd_inv_rejects_consistent_but_shifted_inverse():
    # round trip composes to i-1, not the identity
    verdict = check_agreement(FullFwdInv(), plus1(), minus2(), unary_inputs())
    assert not verdict.agrees
    assert verdict.counterexample[0] == "round-trip"


def test_fwd_inv_accepts_true_inverse():
    verdict = check_agreement(FullFwdInv(), plus1(), minus1(), unary_inputs())
    assert verdict.agrees


def test_fwd_inv_identity_degeneracy():
    verdict = check_agreement(FullFwdInv(), identity("ida"), identity("idb"), unary_inputs())
    assert verdict.agrees


def test_fwd_inv_injectivity_clause_matters():
    # q collapses an extra output onto an observed preimage; the round trip
    # alone cannot see it, the pairwise clause rejects it
    q = fixture_candidate(
        "qc",
        "toy#inv",
        {(Normal(i),): Normal(i - 1) for i in range(-12, 12)} | {(Normal(100),): Normal(5)},
    )
    inputs = unary_inputs(0, 9)
    extra = [((Normal(100),), Normal(100))]
    full = check_agreement(FullFwdInv(), plus1(), q, inputs, extra_observations=extra)
    ablated = check_agreement(
        FullFwdInv(), plus1(), q, inputs, extra_observations=extra, include_bijection=False
    )
    assert not full.agrees and full.counterexample[0] == "injectivity"
    assert ablated.agrees


# --- FWD-SINV --------------------------------------------------------------------


def test_fwd_sinv_l2_rejects_on_inexact_problem():
    # the preimage of p(1)=2 is {0,1} but p(0) != p(1)
    verdict = check_agreement(
        FullFwdSinv(), plus1(), sinv_full(), TestInputSet("toy", ((Normal(1),),))
    )
    assert not verdict.agrees
    assert verdict.counterexample[0] == "L2"
    assert verdict.counterexample[1] == Normal(1)


def test_fwd_sinv_accepts_exact_pair():
    exact_sinv = fn_candidate(
        "qx", lambda v: full_set([Normal(v.payload - 1)]), pid="toy#sinv"
    )
    verdict = check_agreement(FullFwdSinv(), plus1(), exact_sinv, unary_inputs())
    assert verdict.agrees


def test_fwd_sinv_l3_rejects_cross_output_overlap():
    # q maps an unobserved extra output onto an observed preimage; L1 and L2
    # never exercise it but the disjointness clause does
    table = {(Normal(i),): full_set([Normal(i - 1)]) for i in range(-12, 13)}
    table[(Normal(100),)] = full_set([Normal(5)])
    q = fixture_candidate("qover", "toy#sinv", table)
    inputs = unary_inputs(0, 9)
    extra = [((Normal(100),), Normal(100))]
    full = check_agreement(FullFwdSinv(), plus1(), q, inputs, extra_observations=extra)
    ablated = check_agreement(
        FullFwdSinv(), plus1(), q, inputs, extra_observations=extra, include_bijection=False
    )
    assert not full.agrees and full.counterexample[0] == "L3"
    assert ablated.agrees


def _partial_fixtures(invalid_count):
    # p(i1, i2) = i1 + i2, undefined on the first invalid_count odd inputs
    inputs = tuple((Normal(i), Normal(0)) for i in range(9))
    table = {}
    for i in range(9):
        if i < invalid_count:
            table[(Normal(i), Normal(0))] = UNDEFINED
        else:
            table[(Normal(i), Normal(0))] = Normal(i)
    p = fixture_candidate("pp", "toy2", table)
    q = candidate_from_fn(
        "qq",
        "toy2#sinv",
        lambda o, i2: full_set([Normal(o.payload - i2.payload)]),
        [(Normal(o), Normal(0)) for o in range(-5, 15)],
    )
    return p, q, TestInputSet("toy2", inputs)


def test_partial_fwd_sinv_angelic_flip():
    # 9 inputs at fraction 1/3: threshold 3; 3 invalid inputs fail, 2 pass
    p, q, inputs = _partial_fixtures(3)
    assert not check_agreement(PartialFwdSinv(0), p, q, inputs).agrees
    p, q, inputs = _partial_fixtures(2)
    assert check_agreement(PartialFwdSinv(0), p, q, inputs).agrees


def test_partial_scheme_needs_two_parameters():
    with pytest.raises(SchemeMismatchError):
        check_agreement(PartialFwdSinv(0), plus1(), sinv_full(), unary_inputs())


# --- ENUM-SINV --------------------------------------------------------------------


def brute_force_enum_sinv(p_fn, q_fn, lo=-10, hi=10):
    """Independent oracle: both containment directions over the range."""
    for i in range(lo, hi + 1):
        for o in p_fn(i):
            if i not in q_fn(o):
                return False
    observed = sorted({o for i in range(lo, hi + 1) for o in p_fn(i)})
    for o in observed:
        for i in q_fn(o):
            if o not in p_fn(i):
                return False
    return True


def test_enum_sinv_oracle_and_engine_accept():
    assert brute_force_enum_sinv(
        lambda i: {i + 1, i + 2}, lambda o: {o - 1, o - 2}
    )
    verdict = check_agreement(FullEnumSinv(), enum_full(), sinv_full(), unary_inputs())
    assert verdict.agrees


def test_enum_sinv_rejects_element_missing_enumerator():
    assert not brute_force_enum_sinv(lambda i: {i + 1}, lambda o: {o - 1, o - 2})
    verdict = check_agreement(FullEnumSinv(), enum_missing(), sinv_full(), unary_inputs())
    assert not verdict.agrees
    assert verdict.counterexample[0].startswith("dir2")
    # the quoted witness: 2 is not in the faulty enumerator's output for 0
    member = eval_term(
        In(Const(Normal(2)), Call(enum_missing(), [Const(Normal(0))])), {}, EvalConfig()
    )
    assert member.value is False


def test_enum_sinv_second_direction_is_the_bijection_clause():
    verdict = check_agreement(
        FullEnumSinv(), enum_missing(), sinv_full(), unary_inputs(), include_bijection=False
    )
    assert verdict.agrees  # dropping it admits the faulty enumerator


# --- stream lifting -----------------------------------------------------------------


def map_plus1(cid="sp"):
    return candidate_from_fn(
        cid,
        "stream",
        lambda v: Normal([x + 1 for x in v.payload]),
        [
            (Normal(list(seq)),)
            for seq in ([5], [0], [1], [2], [3], [4], [7], [0, 1, 2], [3, 4])
        ],
    )


def test_stream_lift_takes_head():
    lifted = stream_lift(map_plus1())
    with Executor() as ex:
        assert ex.execute(lifted, (Normal(5),)).value == Normal(6)


def test_stream_lift_empty_output_is_demonic():
    broken = fixture_candidate("sb", "stream", [((Normal([5]),), Normal([]))])
    lifted = stream_lift(broken)
    with Executor() as ex:
        assert ex.execute(lifted, (Normal(5),)).value == DEMONIC


def test_stream_scheme_checks_pointwise_consistency():
    inputs = TestInputSet("stream", ((Normal([0, 1, 2]),), (Normal([3, 4]),), (Normal([7]),)))
    witness = candidate_from_fn(
        "wq", "stream#pw#inv", lambda v: Normal(v.payload - 1), [(Normal(i),) for i in RANGE]
    )
    verdict = check_agreement(Stream(FullFwdInv()), map_plus1(), witness, inputs)
    assert verdict.agrees

    # same pointwise view, but the stream program mangles multi-element inputs
    table = [
        ((Normal([0, 1, 2]),), Normal([1, 2, 4])),
        ((Normal([3, 4]),), Normal([4, 5])),
        ((Normal([7]),), Normal([8])),
        ((Normal([0]),), Normal([1])),
        ((Normal([1]),), Normal([2])),
        ((Normal([2]),), Normal([3])),
        ((Normal([3]),), Normal([4])),
        ((Normal([4]),), Normal([5])),
    ]
    mangled = fixture_candidate("sm", "stream", table)
    verdict = check_agreement(Stream(FullFwdInv()), mangled, witness, inputs)
    assert not verdict.agrees
    assert verdict.counterexample[0] == "pointwise-consistency"


def test_pointwise_inputs_flatten_and_dedup():
    inputs = TestInputSet("stream", ((Normal([1, 2]),), (Normal([2, 3]),)))
    flat = pointwise_inputs(inputs)
    assert [args[0].payload for args in flat.inputs] == [1, 2, 3]


# --- union composition -----------------------------------------------------------------


def test_compose_union_dispatch():
    q_some = candidate_from_fn(
        "q_some",
        "toy#sinv",
        lambda sr, s: full_set([Normal(sr.payload + s.payload)]),
        [(Normal(i), Normal(j)) for i in range(3) for j in range(3)],
    )
    q_none = candidate_from_fn(
        "q_none",
        "toy#sinv",
        lambda s: full_set([Normal(-s.payload)]),
        [(Normal(j),) for j in range(3)],
    )
    composed = compose_union_inverse({"some": q_some, "none": q_none})
    with Executor() as ex:
        some = ex.execute(composed, (Normal(1), Normal(2))).value
        none = ex.execute(composed, (Normal(None), Normal(2))).value
    assert some == full_set([Normal(3)])
    assert none == full_set([Normal(-2)])


def test_compose_single_branch_behaves_as_branch():
    q_some = candidate_from_fn(
        "q1", "toy#sinv", lambda sr, s: Normal(sr.payload), [(Normal(1), Normal(0))]
    )
    composed = compose_union_inverse({"some": q_some})
    with Executor() as ex:
        assert ex.execute(composed, (Normal(1), Normal(0))).value == Normal(1)
        assert ex.execute(composed, (Normal(None), Normal(0))).value == DEMONIC


# --- cascade -----------------------------------------------------------------------------


def sinv_overapprox(cid="so"):
    return fn_candidate(
        cid,
        lambda v: full_set([Normal(v.payload - 1), Normal(v.payload - 2), Normal(v.payload - 3)]),
        pid="toy#sinv",
        rng=range(-40, 41),
    )


def test_cascade_all_correct_all_survive():
    forwards = [plus1("f1"), fn_candidate("f2", lambda v: Normal(v.payload + 2))]
    enums = [enum_full("e1"), enum_full("e2")]
    sinvs = [sinv_full("s1")]
    result = cascade_enum_sinv(forwards, enums, sinvs, unary_inputs())
    assert {c.id for c in result.surviving_enumerators} == {"e1", "e2"}
    assert {c.id for c in result.surviving_forward} == {"f1", "f2"}


def test_cascade_no_sinv_agreement_leaves_nothing():
    forwards = [plus1("f1")]
    enums = [enum_full("e1")]
    sinvs = [sinv_overapprox("s1")]
    result = cascade_enum_sinv(forwards, enums, sinvs, unary_inputs())
    assert result.surviving_enumerators == []
    assert result.surviving_forward == []


def test_cascade_eliminates_dominant_error():
    forwards = [
        fn_candidate("f-keep", lambda v: Normal(v.payload)),  # dominant error
        plus1("f-plus1"),
        fn_candidate("f-plus2", lambda v: Normal(v.payload + 2)),
    ]
    enums = [enum_full("e-good"), enum_missing("e-miss")]
    sinvs = [sinv_full("s-good"), sinv_overapprox("s-over")]
    result = cascade_enum_sinv(forwards, enums, sinvs, unary_inputs())
    assert {c.id for c in result.surviving_enumerators} == {"e-good"}
    assert {c.id for c in result.surviving_forward} == {"f-plus1", "f-plus2"}
    stage1 = [r for r in result.log if r.scheme == "full-enum-sinv"]
    assert sum(r.agrees for r in stage1) == 1


def test_cascade_rejects_empty_samples():
    with pytest.raises(ValueError):
        cascade_enum_sinv([], [enum_full()], [sinv_full()], unary_inputs())
