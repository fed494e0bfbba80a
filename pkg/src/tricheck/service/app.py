"""FastAPI service wrapping the consensus engine."""

from __future__ import annotations

from fractions import Fraction

from fastapi import FastAPI, HTTPException

from ..consensus import (
    AgreementMatrix,
    EquivalenceClass,
    Selected,
    cluster,
    majority,
    plurality,
    ransac,
)
from ..evaluation import entropy_by_prefix
from ..evaluator import EvalConfig, eval_term
from ..harness import ExecutionConfig
from ..pipeline import RunConfig, decision_row, metrics_row, run_problems
from ..problems import (
    CandidateProgram,
    FixtureBacked,
    Provenance,
    TestInputSet,
)
from ..schemes import (
    FullEnumSinv,
    FullFwdInv,
    FullFwdSinv,
    FwdEnum,
    PartialEnumSinv,
    PartialFwdInv,
    PartialFwdSinv,
    Scheme,
    Stream,
    check_agreement,
)
from ..terms import parse_sexpr
from ..theory import ModelSpec, simulate
from ..values import Special, SpecialKind
from ..wire import WireError, decode_wire_value, encode_wire_value
from . import models as m

app = FastAPI(title="tricheck", version="0.1.0")


def _candidate(model: m.CandidateModel) -> CandidateProgram:
    table = {}
    for key, obj in model.table.items():
        if isinstance(obj, dict) and set(obj.keys()) == {"special"}:
            table[key.encode("utf-8")] = Special(SpecialKind(obj["special"]))
        else:
            table[key.encode("utf-8")] = decode_wire_value(obj)
    return CandidateProgram(model.id, model.problem_id, FixtureBacked(table))


def _inputs(model: m.InputsModel, problem_id: str) -> TestInputSet:
    rows = tuple(tuple(decode_wire_value(x) for x in row) for row in model.rows)
    return TestInputSet(problem_id, rows, Provenance.FIXTURE)


def _eval_config(fraction: str, timeout_ms: int) -> EvalConfig:
    return EvalConfig(Fraction(fraction), ExecutionConfig(timeout=timeout_ms / 1000))


_SCHEMES = {
    "full-fwd-inv": lambda idx: FullFwdInv(),
    "partial-fwd-inv": PartialFwdInv,
    "full-fwd-sinv": lambda idx: FullFwdSinv(),
    "partial-fwd-sinv": PartialFwdSinv,
    "full-enum-sinv": lambda idx: FullEnumSinv(),
    "partial-enum-sinv": PartialEnumSinv,
    "fwd-enum": lambda idx: FwdEnum(),
}


def _scheme(name: str, arg_index) -> Scheme:
    stream = name.startswith("stream(") and name.endswith(")")
    inner_name = name[7:-1] if stream else name
    if inner_name not in _SCHEMES:
        raise HTTPException(422, f"unknown scheme {name!r}")
    inner = _SCHEMES[inner_name](arg_index)
    return Stream(inner) if stream else inner


@app.get("/healthz")
def healthz() -> dict:
    return {"status": "ok"}


@app.post("/eval", response_model=m.EvalResponse)
def eval_endpoint(req: m.EvalRequest) -> m.EvalResponse:
    resolver = {c.id: _candidate(c) for c in req.candidates}
    try:
        term = parse_sexpr(req.term, resolver)
        env = {name: decode_wire_value(v) for name, v in req.env.items()}
        result = eval_term(term, env, _eval_config(req.angelic_fraction, req.timeout_ms))
    except (WireError, Exception) as exc:
        if isinstance(exc, HTTPException):
            raise
        raise HTTPException(422, str(exc)) from exc
    value = result.value
    out = value.value if isinstance(value, SpecialKind) else ("true" if value else "false")
    return m.EvalResponse(
        result=out,
        forall=[
            m.ForAllStatsModel(
                label=s.label,
                domain_size=s.domain_size,
                true_count=s.true_count,
                angelic_count=s.angelic_count,
                false_count=s.false_count,
                demonic_count=s.demonic_count,
                threshold=s.threshold,
                verdict=s.verdict,
            )
            for s in result.forall_stats
        ],
    )


@app.post("/agreement", response_model=m.AgreementResponse)
def agreement_endpoint(req: m.AgreementRequest) -> m.AgreementResponse:
    scheme = _scheme(req.scheme, req.arg_index)
    p = _candidate(req.p)
    q = _candidate(req.q)
    inputs = _inputs(req.inputs, p.problem_id)
    try:
        verdict = check_agreement(
            scheme, p, q, inputs, _eval_config(req.angelic_fraction, req.timeout_ms)
        )
    except Exception as exc:  # noqa: BLE001
        raise HTTPException(422, str(exc)) from exc
    clause, value = (None, None)
    if verdict.counterexample:
        clause = verdict.counterexample[0]
        binding = verdict.counterexample[1]
        if binding is not None and not isinstance(binding, Special):
            value = encode_wire_value(binding)
    return m.AgreementResponse(
        agrees=verdict.agrees, counterexample_clause=clause, counterexample_value=value
    )


@app.post("/cluster", response_model=m.ClusterResponse)
def cluster_endpoint(req: m.ClusterRequest) -> m.ClusterResponse:
    candidates = [_candidate(c) for c in req.candidates]
    if not candidates:
        raise HTTPException(422, "no candidates")
    inputs = _inputs(req.inputs, candidates[0].problem_id)
    cfg = EvalConfig(execution=ExecutionConfig(timeout=req.timeout_ms / 1000))
    try:
        classes = cluster(candidates, inputs, cfg)
    except Exception as exc:  # noqa: BLE001
        raise HTTPException(422, str(exc)) from exc
    return m.ClusterResponse(
        classes=[
            m.ClassModel(
                class_id=c.class_id,
                members=list(c.members),
                mass=f"{c.mass.numerator}/{c.mass.denominator}",
            )
            for c in classes
        ]
    )


def _decision_model(decision) -> m.DecisionModel:
    if isinstance(decision, Selected):
        score = decision.score
        if score is not None:
            score = (
                f"{Fraction(score).numerator}/{Fraction(score).denominator}"
                if not isinstance(score, int)
                else str(score)
            )
        return m.DecisionModel(
            decision="selected",
            class_id=decision.class_id,
            strategy=decision.strategy,
            score=score,
        )
    return m.DecisionModel(
        decision="abstained", strategy=decision.strategy, reason=decision.reason
    )


@app.post("/consensus", response_model=m.DecisionModel)
def consensus_endpoint(req: m.ConsensusRequest) -> m.DecisionModel:
    if req.strategy in ("plurality", "majority"):
        classes = [
            EquivalenceClass(
                tuple(c.members), c.class_id, {}, Fraction(c.mass)
            )
            for c in req.classes
        ]
        if not classes:
            raise HTTPException(422, "no classes")
        if req.strategy == "plurality":
            return _decision_model(plurality(classes))
        return _decision_model(majority(classes, Fraction(req.threshold)))
    if req.strategy == "ransac":
        if not (req.matrix and req.program_ids and req.witness_ids):
            raise HTTPException(422, "ransac needs matrix, program_ids, witness_ids")
        matrix = AgreementMatrix(
            tuple(req.program_ids),
            tuple(req.witness_ids),
            tuple(tuple(row) for row in req.matrix),
        )
        sizes = req.class_sizes or {pid: 1 for pid in req.program_ids}
        wsizes = req.witness_sizes or {wid: 1 for wid in req.witness_ids}
        try:
            return _decision_model(ransac(matrix, sizes, wsizes))
        except ValueError as exc:
            raise HTTPException(422, str(exc)) from exc
    raise HTTPException(422, f"unknown strategy {req.strategy!r}")


@app.post("/pipeline/run", response_model=m.RunResponse)
def run_endpoint(req: m.RunRequest) -> m.RunResponse:
    cfg = RunConfig(
        problems=req.manifest_path,
        output=req.output_dir,
        strategies=tuple(req.strategies),
        mode=req.mode,
        angelic_fraction=Fraction(req.angelic_fraction),
        timeout=req.timeout_ms / 1000,
        jobs=req.jobs,
        seed=req.seed,
        model=req.model,
        n=req.n,
        temperature=req.temperature,
        replay_dir=req.replay_dir,
        record_dir=req.record_dir,
    )
    try:
        report = run_problems(cfg)
    except (ValueError, FileNotFoundError) as exc:
        raise HTTPException(422, str(exc)) from exc
    decisions = []
    for r in sorted(report.results, key=lambda r: r.problem_id):
        for strategy in sorted(r.decisions):
            decisions.append(decision_row(r.problem_id, strategy, r.decisions[strategy]))
    per_strategy = {
        strategy: m.StrategyMetricsModel(
            counts={
                "n1": report.counts[strategy].n1,
                "n2": report.counts[strategy].n2,
                "n3": report.counts[strategy].n3,
                "n4": report.counts[strategy].n4,
                "n5": report.counts[strategy].n5,
            },
            metrics=metrics_row(report.reports[strategy]),
        )
        for strategy in report.counts
    }
    return m.RunResponse(
        problems=len(report.results), decisions=decisions, per_strategy=per_strategy
    )


@app.post("/theory/simulate", response_model=m.SimulateResponse)
def simulate_endpoint(req: m.SimulateRequest) -> m.SimulateResponse:
    try:
        spec = ModelSpec(
            req.num_hallucination_classes,
            req.problems_per_class,
            req.num_program_classes,
            req.correct_per_problem,
        )
        report = simulate(req.models, req.trials, req.seed, spec, req.mc_models)
    except ValueError as exc:
        raise HTTPException(422, str(exc)) from exc
    return m.SimulateResponse(
        models=report.models,
        trials=report.trials,
        seed=report.seed,
        min_delta=f"{report.min_delta.numerator}/{report.min_delta.denominator}",
        all_positive=report.all_positive,
        rearrangement_ok=report.rearrangement_ok,
        dissociative_positive=report.dissociative_positive,
        mc_within_three_se=report.mc_within_three_se,
        mc_rows=[
            {"exact": exact, "estimate": est, "stderr": se, "within": ok}
            for exact, est, se, ok in report.mc_rows
        ],
    )


@app.post("/entropy", response_model=m.EntropyResponse)
def entropy_endpoint(req: m.EntropyRequest) -> m.EntropyResponse:
    try:
        rows = {
            problem: [
                {"n": float(k), "entropy": h}
                for k, h in entropy_by_prefix(labels, req.step)
            ]
            for problem, labels in req.labels.items()
        }
    except ValueError as exc:
        raise HTTPException(422, str(exc)) from exc
    return m.EntropyResponse(rows=rows)
