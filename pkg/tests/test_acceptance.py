"""Acceptance gate: one test per criterion, at its stated tolerance.

Every check here runs against fixture-backed candidates only; an autouse
guard fails the suite if anything opens a socket.
"""

import math
import random
import socket
import time
from fractions import Fraction
from pathlib import Path

import pytest

from tricheck.consensus import (
    Abstained,
    Selected,
    cluster,
    decide_pipeline,
    majority,
    plurality,
    ransac,
    ransac_oracle_score,
    AgreementMatrix,
)
from tricheck.evaluation import (
    AbstentionCounts,
    metrics,
    semantic_entropy,
)
from tricheck.evaluator import EvalConfig, eval_term
from tricheck.pipeline import load_manifest
from tricheck.problems import FixtureBacked, TestInputSet, candidate_from_fn
from tricheck.schemes import FullEnumSinv, FullFwdSinv, check_agreement
from tricheck.terms import Call, Const, ForAll, In, Var
from tricheck.theory import (
    ModelSpec,
    expected_delta,
    model_dissociative,
    monte_carlo_delta,
    random_model,
    rearrangement_check,
)
from tricheck.values import Normal, full_set, subset

CORPUS = Path(__file__).resolve().parents[1] / "corpus" / "toy" / "problems.jsonl"


@pytest.fixture(autouse=True)
def no_network(monkeypatch):
    def refuse(*args, **kwargs):
        raise AssertionError("acceptance suite must not touch the network")

    monkeypatch.setattr(socket, "socket", refuse)
    yield


@pytest.fixture(autouse=True)
def report_line(request, capsys):
    start = time.perf_counter()
    yield
    elapsed = time.perf_counter() - start
    failed = getattr(request.node, "rep_call_failed", False)
    status = "FAIL" if failed else "PASS"
    with capsys.disabled():
        print(f"[acceptance] {status} {request.node.name} ({elapsed:.2f}s)")


def timed(budget_s):
    def decorate(fn):
        def wrapper(*args, **kwargs):
            start = time.perf_counter()
            fn(*args, **kwargs)
            elapsed = time.perf_counter() - start
            assert elapsed < budget_s, f"criterion exceeded {budget_s}s: {elapsed:.2f}s"

        wrapper.__name__ = fn.__name__
        return wrapper

    return decorate


def candidates_plus12(cid, pid="toy#enum", rng=range(-30, 31)):
    return candidate_from_fn(
        cid, pid,
        lambda v: full_set([Normal(v.payload + 1), Normal(v.payload + 2)]),
        [(Normal(i),) for i in rng],
    )


def sinv_minus12(cid="q", rng=range(-40, 41)):
    return candidate_from_fn(
        cid, "toy#sinv",
        lambda v: full_set([Normal(v.payload - 1), Normal(v.payload - 2)]),
        [(Normal(i),) for i in rng],
    )


# --- criterion 1: worked derivations reproduce exactly (< 1s) --------------------


@timed(1.0)
def test_worked_derivations_reproduce():
    p = candidates_plus12("p")
    q_full = sinv_minus12("q")
    term = ForAll(
        "o", Call(p, [Const(Normal(-1))]), In(Const(Normal(-1)), Call(q_full, [Var("o")]))
    )
    assert eval_term(term, {}, EvalConfig()).value is True

    q_subset = candidate_from_fn(
        "qs", "toy#sinv",
        lambda v: subset([Normal(v.payload - 1)]),
        [(Normal(i),) for i in range(-30, 31)],
    )
    term = ForAll(
        "o", Call(p, [Const(Normal(-1))]), In(Const(Normal(-1)), Call(q_subset, [Var("o")]))
    )
    result = eval_term(term, {}, EvalConfig(angelic_fraction=Fraction(1, 3)))
    assert result.value is False
    stats = result.forall_stats[-1]
    assert (stats.true_count, stats.angelic_count, stats.domain_size) == (1, 1, 2)


# --- criterion 2: scheme counterexamples, brute-forced (< 5s) ----------------------


@timed(5.0)
def test_scheme_counterexamples_match_brute_force():
    inputs = TestInputSet("toy", tuple((Normal(i),) for i in range(-10, 11)))

    # forward/set-valued-inverse rejection on the two-valid-answers problem
    p_fwd = candidate_from_fn(
        "p", "toy", lambda v: Normal(v.payload + 1), [(Normal(i),) for i in range(-30, 31)]
    )
    verdict = check_agreement(FullFwdSinv(), p_fwd, sinv_minus12(), inputs)
    assert not verdict.agrees
    assert verdict.counterexample[0] in ("L2", "L3")
    at_one = check_agreement(
        FullFwdSinv(), p_fwd, sinv_minus12(), TestInputSet("toy", ((Normal(1),),))
    )
    assert not at_one.agrees and at_one.counterexample[0] == "L2"
    assert at_one.counterexample[1] == Normal(1)

    def brute_force(p_fn, q_fn):
        for i in range(-10, 11):
            if any(i not in q_fn(o) for o in p_fn(i)):
                return False
        outputs = sorted({o for i in range(-10, 11) for o in p_fn(i)})
        for o in outputs:
            if any(o not in p_fn(i2) for i2 in q_fn(o)):
                return False
        return True

    enum_good = candidates_plus12("e")
    enum_missing = candidate_from_fn(
        "em", "toy#enum",
        lambda v: full_set([Normal(v.payload + 1)]),
        [(Normal(i),) for i in range(-30, 31)],
    )
    cases = [
        (enum_good, lambda i: {i + 1, i + 2}, True),
        (enum_missing, lambda i: {i + 1}, False),
    ]
    q_fn = lambda o: {o - 1, o - 2}  # noqa: E731
    for enum_candidate, p_fn, _ in cases:
        oracle = brute_force(p_fn, q_fn)
        verdict = check_agreement(FullEnumSinv(), enum_candidate, sinv_minus12(), inputs)
        assert verdict.agrees == oracle
    assert brute_force(lambda i: {i + 1, i + 2}, q_fn) is True
    assert brute_force(lambda i: {i + 1}, q_fn) is False

    # the quoted witness for the faulty enumerator: 2 is missing from p'(0)
    member = eval_term(
        In(Const(Normal(2)), Call(enum_missing, [Const(Normal(0))])), {}, EvalConfig()
    )
    assert member.value is False


# --- criterion 3: motivating fixture decisions (< 10s) --------------------------------


@timed(10.0)
def test_motivating_fixture_decisions():
    bundles = {b.description.id: b for b in load_manifest(str(CORPUS))}
    bundle = bundles["toy-inexact"]

    classes = cluster(bundle.forward, bundle.test_inputs)
    masses = {c.class_id: c.mass for c in classes}
    assert masses["fwd-keep-000"] == Fraction(23, 100)
    assert masses["fwd-plus1-000"] == Fraction(7, 100)
    assert masses["fwd-plus1-000"] + masses["fwd-plus2-000"] == Fraction(14, 100)

    chosen = plurality(classes)
    assert chosen.class_id == "fwd-keep-000"  # the dominant wrong answer

    assert isinstance(majority(classes), Abstained)

    decision = decide_pipeline(
        bundle.forward, bundle.enum_samples, bundle.sinv_samples, bundle.test_inputs
    )
    assert isinstance(decision, Selected)
    assert decision.strategy == "enum-sinv-cascade"
    assert decision.class_id in ("fwd-plus1-000", "fwd-plus2-000")
    assert decision.class_id != chosen.class_id


# --- criterion 4: theory suite (< 60s) ---------------------------------------------------


@timed(60.0)
def test_theory_suite():
    spec = ModelSpec()  # equal-correct profile
    for seed in range(1000):
        model = random_model(spec, seed)
        assert expected_delta(model) > 0  # exact rationals: strictly positive
        for h in model.classes:
            lhs, rhs, strict = rearrangement_check(h.pi, h.sigma)
            assert lhs >= rhs
            if strict:
                assert lhs > rhs

    dspec = ModelSpec(profile="dissociative")
    for seed in range(1000):
        model = random_model(dspec, 5_000_000 + seed)
        assert model_dissociative(model)
        assert expected_delta(model) > 0

    # duplicate-swap construction: equality classified as non-strict
    pi = (Fraction(2, 5), Fraction(2, 5), Fraction(1, 5))
    lhs, rhs, strict = rearrangement_check(pi, (1, 0, 2))
    assert lhs == rhs and not strict

    for seed in range(10):
        model = random_model(spec, 9_000_000 + seed)
        exact = float(expected_delta(model))
        estimate = monte_carlo_delta(model, 100_000, seed=seed)
        assert not estimate.widened
        assert abs(estimate.delta - exact) <= 3 * estimate.stderr


# --- criterion 5: ransac oracle equivalence (< 30s) ----------------------------------------


@timed(30.0)
def test_ransac_equals_exhaustive_oracle():
    def check(cells, sizes, wsizes):
        rows, cols = len(cells), len(cells[0])
        matrix = AgreementMatrix(
            tuple(f"p{i}" for i in range(rows)),
            tuple(f"w{j}" for j in range(cols)),
            tuple(tuple(r) for r in cells),
        )
        decision = ransac(
            matrix,
            {f"p{i}": sizes[i] for i in range(rows)},
            {f"w{j}": wsizes[j] for j in range(cols)},
        )
        oracle = ransac_oracle_score(cells, sizes, wsizes)
        if oracle == 0:
            assert isinstance(decision, Abstained)
        else:
            assert isinstance(decision, Selected) and decision.score == oracle

    # exhaustive over every 0/1 matrix up to 3x3 (unit sizes)
    for rows in range(1, 4):
        for cols in range(1, 4):
            for bits in range(1 << (rows * cols)):
                cells = [
                    [bool(bits >> (r * cols + c) & 1) for c in range(cols)]
                    for r in range(rows)
                ]
                check(cells, [1] * rows, [1] * cols)

    # seeded corpus across every shape up to 6x6, with class sizes
    rng = random.Random(20240806)
    for rows in range(1, 7):
        for cols in range(1, 7):
            for _ in range(60):
                cells = [[rng.random() < 0.45 for _ in range(cols)] for _ in range(rows)]
                sizes = [rng.randint(1, 30) for _ in range(rows)]
                wsizes = [rng.randint(1, 30) for _ in range(cols)]
                check(cells, sizes, wsizes)


# --- criterion 6: metrics formulas (< 1s) ------------------------------------------------------


@timed(1.0)
def test_metrics_formulas():
    rng = random.Random(13)
    for _ in range(500):
        ns = [rng.randint(0, 12) for _ in range(5)]
        counts = AbstentionCounts(*ns)
        report = metrics(counts)
        n1, n2, n3, n4, n5 = ns
        total = sum(ns)
        assert counts.total == total
        if n1 + n2 + n4:
            assert report.reliable_accuracy == Fraction(n1, n1 + n2 + n4)
        else:
            assert report.reliable_accuracy is None
        if total:
            assert report.overall_accuracy == Fraction(n1 + n5, total)
            assert report.abstention_rate == Fraction(n3 + n5, total)
        else:
            assert report.overall_accuracy is None
        if n3 + n5:
            assert report.precision_abs == Fraction(n5, n3 + n5)
        else:
            assert report.precision_abs is None
        if n2 + n4 + n5:
            assert report.recall_abs == Fraction(n5, n2 + n4 + n5)
        else:
            assert report.recall_abs is None
        p, r = report.precision_abs, report.recall_abs
        if p is None or r is None or p + r == 0:
            assert report.f1_abs is None
        else:
            assert report.f1_abs == 2 * p * r / (p + r)

    from tricheck.consensus import EquivalenceClass

    degenerate = [EquivalenceClass(("a",), "a", {}, Fraction(1))]
    assert abs(semantic_entropy(degenerate)) < 1e-9
    for k in (2, 3, 4, 7):
        uniform = [
            EquivalenceClass((f"c{i}",), f"c{i}", {}, Fraction(1, k)) for i in range(k)
        ]
        assert abs(semantic_entropy(uniform) - math.log(k)) < 1e-9


# --- criterion 7: fixtures only, no worker processes, no network ----------------------------


@timed(5.0)
def test_primary_suite_is_fixture_only():
    bundles = load_manifest(str(CORPUS))
    for bundle in bundles:
        pools = [
            bundle.forward,
            bundle.enum_samples,
            bundle.sinv_samples,
            bundle.inv_samples,
            bundle.postconditions,
            bundle.syntactic,
            bundle.off_by_one,
        ]
        for pool in pools:
            for candidate in pool:
                assert isinstance(candidate.backend, FixtureBacked)
        for witness in bundle.tests:
            assert isinstance(witness.candidate.backend, FixtureBacked)
    # the no_network fixture above rejects any socket use throughout this module
