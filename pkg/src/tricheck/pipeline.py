"""Batch orchestration: manifests, strategy runs, persisted artifacts.

The problem manifest is line-delimited JSON; every candidate is a fixture
table keyed by the canonical encoding of its argument tuple (the on-disk key
format), with special outcomes written as {"special": "undefined"|...}.
Artifacts (decisions, clusters, verdict logs, metrics) are written with
sorted keys and fixed ordering so replayed runs are byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence

from .baselines import (
    TestWitnessCandidate,
    check_equivalence_agreement,
    check_postcondition_agreement,
    check_test_agreement,
)
from .consensus import (
    Abstained,
    AgreementMatrix,
    ConsensusDecision,
    EquivalenceClass,
    Selected,
    cluster,
    decide_pipeline,
    majority,
    plurality,
    ransac,
)
from .evaluation import (
    AbstentionCounts,
    GroundTruth,
    Judge,
    MetricsReport,
    confusion,
    judge_class,
    metrics,
)
from .evaluator import EvalConfig
from .harness import ExecutionConfig, Executor
from .problems import (
    CandidateProgram,
    FixtureBacked,
    FunctionSignature,
    ProblemDescription,
    Provenance,
    RunnerBacked,
    TestInputSet,
)
from .values import Special, SpecialKind, Value, outcome_fingerprint
from .wire import decode_wire_value

ALL_STRATEGIES = (
    "tri",
    "plurality",
    "majority",
    "ransac-tests",
    "ransac-postcondition",
    "syntactic",
    "off-by-one",
)


@dataclass
class ProblemBundle:
    description: ProblemDescription
    test_inputs: Optional[TestInputSet]
    forward: List[CandidateProgram]
    enum_samples: List[CandidateProgram] = field(default_factory=list)
    sinv_samples: List[CandidateProgram] = field(default_factory=list)
    inv_samples: List[CandidateProgram] = field(default_factory=list)
    postconditions: List[CandidateProgram] = field(default_factory=list)
    tests: List[TestWitnessCandidate] = field(default_factory=list)
    syntactic: List[CandidateProgram] = field(default_factory=list)
    off_by_one: List[CandidateProgram] = field(default_factory=list)
    judge: Optional[Judge] = None
    stream: bool = False
    partial_arg: Optional[int] = None


@dataclass(frozen=True)
class RunConfig:
    problems: str
    output: str
    strategies: tuple = ("tri", "plurality", "majority")
    mode: str = "replay"
    angelic_fraction: Fraction = Fraction(1, 3)
    timeout: float = 10.0
    jobs: int = 1
    seed: int = 0
    model: str = "default"
    n: int = 30
    temperature: float = 1.0
    replay_dir: Optional[str] = None
    record_dir: Optional[str] = None

    def __post_init__(self) -> None:
        unknown = set(self.strategies) - set(ALL_STRATEGIES)
        if unknown:
            raise ValueError(f"unknown strategies: {sorted(unknown)}")
        if self.mode not in ("replay", "live"):
            raise ValueError(f"unknown mode {self.mode!r}")


# --- manifest loading ---------------------------------------------------------


def _decode_table_value(obj) -> Value:
    if isinstance(obj, dict) and set(obj.keys()) == {"special"}:
        return Special(SpecialKind(obj["special"]))
    return decode_wire_value(obj)


def _decode_table(table: Mapping[str, object]) -> Dict[bytes, Value]:
    return {k.encode("utf-8"): _decode_table_value(v) for k, v in table.items()}


def _load_candidates(problem_id: str, entries: Sequence[Mapping]) -> List[CandidateProgram]:
    out = []
    for entry in entries:
        table = _decode_table(entry["table"])
        count = int(entry.get("count", 1))
        if count == 1:
            out.append(CandidateProgram(entry["id"], problem_id, FixtureBacked(table)))
        else:
            for j in range(count):
                out.append(
                    CandidateProgram(
                        f"{entry['id']}-{j:03d}", problem_id, FixtureBacked(table)
                    )
                )
    return out


def _load_tests(problem_id: str, entries: Sequence[Mapping]) -> List[TestWitnessCandidate]:
    out = []
    for entry in entries:
        candidate = CandidateProgram(
            entry["id"], problem_id, FixtureBacked(_decode_table(entry["table"]))
        )
        input_args = tuple(decode_wire_value(x) for x in entry["input"])
        out.append(TestWitnessCandidate(candidate, input_args))
    return out


def _load_judge(problem_id: str, obj: Optional[Mapping]) -> Optional[Judge]:
    if obj is None:
        return None
    if obj.get("mode", "pairs") == "pairs":
        pairs = {
            k.encode("utf-8"): frozenset(
                outcome_fingerprint(_decode_table_value(v)) for v in accepted
            )
            for k, accepted in obj["pairs"].items()
        }
        return Judge(problem_id, accepted_pairs=pairs)
    fingerprints = frozenset(fp.encode("utf-8") for fp in obj["fingerprints"])
    return Judge(problem_id, accepted_fingerprints=fingerprints)


def load_manifest(path: str) -> List[ProblemBundle]:
    bundles = []
    for line in Path(path).read_text("utf-8").splitlines():
        line = line.strip()
        if not line:
            continue
        obj = json.loads(line)
        sig = FunctionSignature(
            obj["signature"]["name"],
            tuple((n, t) for n, t in obj["signature"]["params"]),
            obj["signature"]["returns"],
        )
        description = ProblemDescription(obj["id"], obj.get("text", ""), sig)
        test_inputs = None
        if obj.get("inputs"):
            inputs = tuple(
                tuple(decode_wire_value(x) for x in row) for row in obj["inputs"]
            )
            test_inputs = TestInputSet(obj["id"], inputs, Provenance.FIXTURE)
        cands = obj.get("candidates", {})
        bundles.append(
            ProblemBundle(
                description=description,
                test_inputs=test_inputs,
                forward=_load_candidates(obj["id"], cands.get("forward", [])),
                enum_samples=_load_candidates(obj["id"], cands.get("enum", [])),
                sinv_samples=_load_candidates(obj["id"], cands.get("sinv", [])),
                inv_samples=_load_candidates(obj["id"], cands.get("inv", [])),
                postconditions=_load_candidates(
                    obj["id"], cands.get("postconditions", [])
                ),
                tests=_load_tests(obj["id"], cands.get("tests", [])),
                syntactic=_load_candidates(obj["id"], cands.get("syntactic", [])),
                off_by_one=_load_candidates(obj["id"], cands.get("offbyone", [])),
                judge=_load_judge(obj["id"], obj.get("judge")),
                stream=bool(obj.get("stream", False)),
                partial_arg=obj.get("partial_arg"),
            )
        )
    bundles.sort(key=lambda b: b.description.id)
    return bundles


# --- sampled candidates (live and transcript-replay runs) -----------------------


def _wrap_sources(
    sources: Sequence[str],
    problem: ProblemDescription,
    out_dir: Path,
    role: str,
    set_result: bool,
) -> List[CandidateProgram]:
    """Persist sampled sources and wrap them as worker-backed candidates."""
    import os

    from .harness import WORKER_CMD_ENV

    if not os.environ.get(WORKER_CMD_ENV):
        raise ValueError(
            f"sampled candidates need {WORKER_CMD_ENV} to point at a worker command"
        )
    out_dir.mkdir(parents=True, exist_ok=True)
    candidates = []
    for i, source in enumerate(sources):
        path = out_dir / f"{role}-{i:03d}.mjs"
        path.write_text(source, "utf-8")
        extra = ("--set-result",) if set_result else ()
        backend = RunnerBacked(str(path), problem.signature.name, extra_args=extra)
        candidates.append(CandidateProgram(f"{role}-{i:03d}", problem.id, backend))
    return candidates


def sample_bundle(
    bundle: ProblemBundle, cfg: RunConfig, gateway, out_root: Path
) -> None:
    """Fill a bundle's empty sample pools by sampling through the gateway."""
    from .gateway import SamplingParams, TransformKind

    d = bundle.description
    params = SamplingParams(cfg.n, cfg.temperature, cfg.model)
    src_dir = out_root / "sources" / d.id
    if bundle.test_inputs is None:
        bundle.test_inputs = gateway.gen_test_inputs(d, params)
    returns_set = d.signature.returns.startswith("set[")
    if not bundle.forward:
        bundle.forward = _wrap_sources(
            gateway.sample_programs(d, params), d, src_dir, "fwd", returns_set
        )
    if d.signature.arity > 1 and bundle.partial_arg is None:
        bundle.partial_arg = gateway.choose_invert_arg(d, params)
    if not bundle.enum_samples:
        enum_d = gateway.transform(d, TransformKind.ENUMERATION, params)
        bundle.enum_samples = _wrap_sources(
            gateway.sample_programs(enum_d, params), enum_d, src_dir, "enum", True
        )
    if not bundle.sinv_samples:
        sinv_d = gateway.transform(
            d, TransformKind.SET_VALUED_INVERSE, params,
            arg_index=bundle.partial_arg if bundle.partial_arg is not None else 0,
        )
        bundle.sinv_samples = _wrap_sources(
            gateway.sample_programs(sinv_d, params), sinv_d, src_dir, "sinv", True
        )


def _build_gateway(cfg: RunConfig):
    from .gateway import Gateway, HttpProvider

    provider = None
    if cfg.mode == "live":
        import os

        base_url = os.environ.get("TRI_API_BASE", "https://api.openai.com/v1")
        provider = HttpProvider(base_url)
    return Gateway(provider, record_dir=cfg.record_dir, replay_dir=cfg.replay_dir)


# --- strategy execution --------------------------------------------------------


def _ransac_over_witnesses(
    fclasses: Sequence[EquivalenceClass],
    witness_ids: Sequence[str],
    witness_sizes: Mapping[str, int],
    agree,
    strategy: str,
) -> ConsensusDecision:
    if not witness_ids:
        return Abstained("missing witnesses", strategy)
    cells = tuple(
        tuple(agree(cls, wid) for wid in witness_ids) for cls in fclasses
    )
    matrix = AgreementMatrix(
        tuple(c.class_id for c in fclasses), tuple(witness_ids), cells
    )
    decision = ransac(matrix, {c.class_id: c.size for c in fclasses}, dict(witness_sizes))
    if isinstance(decision, Selected):
        return Selected(decision.class_id, decision.representative, strategy, decision.score)
    return Abstained(decision.reason, strategy)


def run_strategy(
    name: str,
    bundle: ProblemBundle,
    fclasses: Sequence[EquivalenceClass],
    cfg: EvalConfig,
    executor: Executor,
    log_sink: Optional[list] = None,
) -> ConsensusDecision:
    reps = {c.class_id: _find(bundle.forward, c.representative) for c in fclasses}
    if name == "plurality":
        return plurality(fclasses)
    if name == "majority":
        return majority(fclasses)
    if name == "tri":
        if not (bundle.enum_samples and bundle.sinv_samples) and not (
            bundle.sinv_samples or bundle.inv_samples
        ):
            return Abstained("missing witnesses", "tri")
        return decide_pipeline(
            bundle.forward,
            bundle.enum_samples,
            bundle.sinv_samples,
            bundle.test_inputs,
            cfg,
            inv_samples=bundle.inv_samples,
            partial_arg=bundle.partial_arg,
            stream=bundle.stream,
            executor=executor,
            log_sink=log_sink,
        )
    if name == "ransac-postcondition":
        witnesses = {w.id: w for w in bundle.postconditions}
        return _ransac_over_witnesses(
            fclasses,
            sorted(witnesses),
            {wid: 1 for wid in witnesses},
            lambda cls, wid: check_postcondition_agreement(
                reps[cls.class_id], witnesses[wid], bundle.test_inputs, cfg, executor
            ),
            "ransac-postcondition",
        )
    if name == "ransac-tests":
        witnesses = {w.candidate.id: w for w in bundle.tests}
        return _ransac_over_witnesses(
            fclasses,
            sorted(witnesses),
            {wid: 1 for wid in witnesses},
            lambda cls, wid: check_test_agreement(
                reps[cls.class_id], witnesses[wid], cfg, executor
            ),
            "ransac-tests",
        )
    if name in ("syntactic", "off-by-one"):
        pool = bundle.syntactic if name == "syntactic" else bundle.off_by_one
        if not pool:
            return Abstained("missing witnesses", name)
        wclasses = cluster(pool, bundle.test_inputs, cfg, executor)
        wreps = {c.class_id: _find(pool, c.representative) for c in wclasses}
        return _ransac_over_witnesses(
            fclasses,
            [c.class_id for c in wclasses],
            {c.class_id: c.size for c in wclasses},
            lambda cls, wid: check_equivalence_agreement(
                reps[cls.class_id], wreps[wid], bundle.test_inputs, cfg, executor
            ),
            name,
        )
    raise ValueError(f"unknown strategy {name!r}")


def _find(candidates: Sequence[CandidateProgram], cid: str) -> CandidateProgram:
    for c in candidates:
        if c.id == cid:
            return c
    raise KeyError(cid)


# --- whole-run orchestration -----------------------------------------------------


@dataclass
class ProblemResult:
    problem_id: str
    classes: List[EquivalenceClass]
    decisions: Dict[str, ConsensusDecision]
    ground_truth: GroundTruth
    error: Optional[str] = None


@dataclass
class RunReport:
    results: List[ProblemResult]
    counts: Dict[str, AbstentionCounts]
    reports: Dict[str, MetricsReport]


def run_problems(
    cfg: RunConfig,
    bundles: Optional[Sequence[ProblemBundle]] = None,
    gateway=None,
) -> RunReport:
    bundles = list(bundles) if bundles is not None else load_manifest(cfg.problems)
    eval_cfg = EvalConfig(cfg.angelic_fraction, ExecutionConfig(timeout=cfg.timeout))
    missing = [b.description.id for b in bundles if b.judge is None]
    if missing:
        raise ValueError(f"missing judges for problems: {missing}")

    needs_sampling = [b for b in bundles if not b.forward or b.test_inputs is None]
    if needs_sampling:
        if cfg.mode == "replay" and cfg.replay_dir is None:
            raise ValueError(
                "replay mode needs a transcript directory to sample candidates for: "
                + ", ".join(b.description.id for b in needs_sampling)
            )
        gateway = gateway or _build_gateway(cfg)
        for bundle in needs_sampling:
            sample_bundle(bundle, cfg, gateway, Path(cfg.output))

    def run_one(bundle: ProblemBundle) -> tuple:
        per_problem_log: List = []
        with Executor(eval_cfg.execution) as executor:
            fclasses = cluster(bundle.forward, bundle.test_inputs, eval_cfg, executor)
            correct_ids = frozenset(
                c.class_id for c in fclasses if judge_class(bundle.judge, c)
            )
            truth = GroundTruth(solvable=bool(correct_ids), correct_class_ids=correct_ids)
            decisions: Dict[str, ConsensusDecision] = {}
            for strategy in cfg.strategies:
                try:
                    decisions[strategy] = run_strategy(
                        strategy, bundle, fclasses, eval_cfg, executor, per_problem_log
                    )
                except Exception as exc:  # noqa: BLE001 - soft per-problem failure
                    decisions[strategy] = Abstained(f"error: {exc}", strategy)
        result = ProblemResult(bundle.description.id, fclasses, decisions, truth)
        return result, per_problem_log

    verdict_log: List = []
    if cfg.jobs > 1 and len(bundles) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            outcomes = list(pool.map(run_one, bundles))
    else:
        outcomes = [run_one(b) for b in bundles]
    results = [result for result, _ in outcomes]
    for _, log in outcomes:
        verdict_log.extend(log)

    counts: Dict[str, AbstentionCounts] = {}
    reports: Dict[str, MetricsReport] = {}
    for strategy in cfg.strategies:
        pairs = [(r.decisions[strategy], r.ground_truth) for r in results]
        counts[strategy] = confusion(pairs)
        reports[strategy] = metrics(counts[strategy])

    _write_artifacts(cfg, results, verdict_log, counts, reports)
    return RunReport(results, counts, reports)


# --- artifact serialization ------------------------------------------------------


def _frac(x) -> Optional[str]:
    if x is None:
        return None
    f = Fraction(x)
    return f"{f.numerator}/{f.denominator}"


def decision_row(problem_id: str, strategy: str, decision: ConsensusDecision) -> dict:
    if isinstance(decision, Selected):
        return {
            "problem": problem_id,
            "strategy": strategy,
            "decision": "selected",
            "class": decision.class_id,
            "score": _frac(decision.score) if decision.score is not None else None,
        }
    return {
        "problem": problem_id,
        "strategy": strategy,
        "decision": "abstained",
        "reason": decision.reason,
    }


def _write_jsonl(path: Path, rows: Sequence[dict]) -> None:
    with path.open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True, separators=(",", ":")) + "\n")


def metrics_row(report: MetricsReport) -> dict:
    return {
        "reliable_accuracy": _frac(report.reliable_accuracy),
        "overall_accuracy": _frac(report.overall_accuracy),
        "abstention_rate": _frac(report.abstention_rate),
        "precision_abs": _frac(report.precision_abs),
        "recall_abs": _frac(report.recall_abs),
        "f1_abs": _frac(report.f1_abs),
    }


def _write_artifacts(cfg, results, verdict_log, counts, reports) -> None:
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)

    rows = []
    for r in sorted(results, key=lambda r: r.problem_id):
        for strategy in sorted(r.decisions):
            rows.append(decision_row(r.problem_id, strategy, r.decisions[strategy]))
    _write_jsonl(out / "decisions.jsonl", rows)

    cluster_rows = []
    for r in sorted(results, key=lambda r: r.problem_id):
        for cls in r.classes:
            cluster_rows.append(
                {
                    "problem": r.problem_id,
                    "class": cls.class_id,
                    "members": list(cls.members),
                    "mass": _frac(cls.mass),
                    "correct": cls.class_id in r.ground_truth.correct_class_ids,
                }
            )
    _write_jsonl(out / "clusters.jsonl", cluster_rows)

    verdict_rows = [
        {
            "problem": v.problem_id,
            "scheme": v.scheme,
            "p": v.p_id,
            "q": v.q_id,
            "agrees": v.agrees,
            "counterexample": v.counterexample,
        }
        for v in verdict_log
    ]
    verdict_rows.sort(key=lambda r: (r["problem"], r["scheme"], r["p"], r["q"]))
    _write_jsonl(out / "verdicts.jsonl", verdict_rows)

    metric_obj = {
        strategy: {
            "counts": {
                "n1": counts[strategy].n1,
                "n2": counts[strategy].n2,
                "n3": counts[strategy].n3,
                "n4": counts[strategy].n4,
                "n5": counts[strategy].n5,
            },
            "metrics": metrics_row(reports[strategy]),
        }
        for strategy in sorted(counts)
    }
    (out / "metrics.json").write_text(
        json.dumps(metric_obj, sort_keys=True, indent=1) + "\n", "utf-8"
    )
