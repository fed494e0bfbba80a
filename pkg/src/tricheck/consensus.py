"""Clusters candidates into semantic equivalence classes and forms consensus.

Two candidates land in the same class iff their outcome vectors over the
shared test inputs match (special outcomes compared by kind). Strategies:
plurality (largest class), majority (class with mass >= threshold, else
abstain), RANSAC over a program/witness agreement matrix, and the staged
select-or-abstain pipeline combining the triangulation schemes.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Union

from .evaluator import EvalConfig
from .harness import Executor
from .problems import CandidateProgram, TestInputSet, args_key
from .schemes import (
    FullFwdInv,
    FullFwdSinv,
    PartialFwdInv,
    PartialFwdSinv,
    Scheme,
    Stream,
    VerdictRecord,
    cascade_enum_sinv,
    check_agreement,
    scheme_name,
)
from .values import Value, outcome_fingerprint


@dataclass(frozen=True)
class EquivalenceClass:
    members: tuple
    representative: str
    behavior: Mapping[bytes, Value]  # canonical input key -> outcome value
    mass: Fraction

    @property
    def class_id(self) -> str:
        return self.representative

    @property
    def size(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class Selected:
    class_id: str
    representative: str
    strategy: str
    score: object = None


@dataclass(frozen=True)
class Abstained:
    reason: str
    strategy: str = ""


ConsensusDecision = Union[Selected, Abstained]


@dataclass(frozen=True)
class AgreementMatrix:
    program_ids: tuple
    witness_ids: tuple
    cells: tuple  # rows of booleans, aligned with program_ids x witness_ids

    def agrees(self, program_id: str, witness_id: str) -> bool:
        r = self.program_ids.index(program_id)
        c = self.witness_ids.index(witness_id)
        return self.cells[r][c]

    def row(self, r: int) -> frozenset:
        return frozenset(
            wid for wid, cell in zip(self.witness_ids, self.cells[r]) if cell
        )


def cluster(
    candidates: Sequence[CandidateProgram],
    test_inputs: TestInputSet,
    cfg: Optional[EvalConfig] = None,
    executor: Optional[Executor] = None,
) -> List[EquivalenceClass]:
    """Group candidates by identical outcome vectors over the test inputs."""
    cfg = cfg or EvalConfig()
    own = executor is None
    executor = executor or Executor(cfg.execution)
    try:
        outcomes = executor.execute_all(list(candidates), test_inputs)
    finally:
        if own:
            executor.close()
    groups: Dict[tuple, List[CandidateProgram]] = {}
    behaviors: Dict[tuple, Dict[bytes, Value]] = {}
    for c in candidates:
        vector = tuple(outcome_fingerprint(o.value) for o in outcomes[c.id])
        groups.setdefault(vector, []).append(c)
        if vector not in behaviors:
            behaviors[vector] = {
                args_key(args): o.value
                for args, o in zip(test_inputs.inputs, outcomes[c.id])
            }
    total = len(candidates)
    classes = []
    for vector, members in groups.items():
        ids = sorted(m.id for m in members)
        classes.append(
            EquivalenceClass(
                members=tuple(ids),
                representative=ids[0],
                behavior=behaviors[vector],
                mass=Fraction(len(ids), total),
            )
        )
    classes.sort(key=lambda cls: cls.representative)
    return classes


def plurality(classes: Sequence[EquivalenceClass]) -> ConsensusDecision:
    """Largest class wins; ties break to the smaller representative id."""
    if not classes:
        raise ValueError("plurality over zero classes")
    best = min(classes, key=lambda c: (-c.mass, c.representative))
    return Selected(best.class_id, best.representative, "plurality", best.mass)


def majority(
    classes: Sequence[EquivalenceClass], threshold: Fraction = Fraction(1, 2)
) -> ConsensusDecision:
    """Class with mass >= threshold, abstaining when none reaches it."""
    if not 0 < threshold <= 1:
        raise ValueError("threshold must be in (0, 1]")
    eligible = [c for c in classes if c.mass >= threshold]
    if not eligible:
        return Abstained("no majority", "majority")
    best = min(eligible, key=lambda c: (-c.mass, c.representative))
    return Selected(best.class_id, best.representative, "majority", best.mass)


def ransac(
    matrix: AgreementMatrix,
    class_sizes: Mapping[str, int],
    witness_sizes: Mapping[str, int],
) -> ConsensusDecision:
    """Consensus maximizing (pooled program size) x (agreeing witness size).

    Program classes sharing an identical agreement row pool their sizes; the
    score of a class is that pooled size times the total size of the witness
    classes it agrees with. Abstains when no class agrees with any witness.
    """
    if not matrix.program_ids:
        raise ValueError("empty agreement matrix")
    if set(matrix.program_ids) - set(class_sizes) or set(matrix.witness_ids) - set(
        witness_sizes
    ):
        raise ValueError("size maps do not cover the matrix")
    rows = {pid: matrix.row(r) for r, pid in enumerate(matrix.program_ids)}
    pooled: Dict[frozenset, int] = {}
    for pid, row in rows.items():
        pooled[row] = pooled.get(row, 0) + class_sizes[pid]
    scored = []
    for pid, row in rows.items():
        if not row:
            continue
        witness_mass = sum(witness_sizes[w] for w in row)
        program_mass = pooled[row]
        scored.append((program_mass * witness_mass, witness_mass, class_sizes[pid], pid))
    if not scored:
        return Abstained("no agreeing witness", "ransac")
    scored.sort(key=lambda t: (-t[0], -t[1], -t[2], t[3]))
    score, _, _, pid = scored[0]
    return Selected(pid, pid, "ransac", score)


def ransac_oracle_score(cells: Sequence[Sequence[bool]], row_sizes=None, col_sizes=None) -> int:
    """Brute-force maximum of |P|x|Q| over consensus sets.

    Enumerates every witness subset Q and pairs it with the programs whose
    agreement row is exactly Q; independent of the row-grouping shortcut used
    by ransac().
    """
    n_rows = len(cells)
    n_cols = len(cells[0]) if n_rows else 0
    row_sizes = row_sizes or [1] * n_rows
    col_sizes = col_sizes or [1] * n_cols
    rows = [
        frozenset(c for c in range(n_cols) if cells[r][c]) for r in range(n_rows)
    ]
    best = 0
    for mask in range(1, 1 << n_cols):
        q = frozenset(c for c in range(n_cols) if mask & (1 << c))
        p_weight = sum(row_sizes[r] for r in range(n_rows) if rows[r] == q)
        if p_weight:
            q_weight = sum(col_sizes[c] for c in q)
            best = max(best, p_weight * q_weight)
    return best


def agreement_matrix(
    program_classes: Sequence[EquivalenceClass],
    witness_classes: Sequence[EquivalenceClass],
    agree,
) -> AgreementMatrix:
    """Class-level matrix: one verdict per (representative, representative)."""
    cells = tuple(
        tuple(bool(agree(p, w)) for w in witness_classes) for p in program_classes
    )
    return AgreementMatrix(
        tuple(c.class_id for c in program_classes),
        tuple(c.class_id for c in witness_classes),
        cells,
    )


def _sizes(classes: Sequence[EquivalenceClass]) -> Dict[str, int]:
    return {c.class_id: c.size for c in classes}


def _derived_witness_inputs(
    problem_id: str,
    observations: Sequence[tuple],
    arity: int,
    inv_index: int,
) -> Optional[TestInputSet]:
    """Input set on which inverse-side witnesses are clustered.

    Witnesses consume (observed output, fixed arguments); their equivalence is
    judged on the outputs actually observed from the forward side.
    """
    from .values import Normal, Special

    inputs = []
    for args, out in observations:
        if isinstance(out, Special) or not isinstance(out, Normal):
            continue
        if inv_index < 0 or arity == 1:
            inputs.append((out,))
        else:
            fixed = tuple(a for k, a in enumerate(args) if k != inv_index)
            inputs.append((out, *fixed))
    if not inputs:
        return None
    return TestInputSet(problem_id + "#witness", tuple(inputs))


def decide_pipeline(
    forward: Sequence[CandidateProgram],
    enum_samples: Sequence[CandidateProgram],
    sinv_samples: Sequence[CandidateProgram],
    test_inputs: TestInputSet,
    cfg: Optional[EvalConfig] = None,
    *,
    inv_samples: Sequence[CandidateProgram] = (),
    partial_arg: Optional[int] = None,
    stream: bool = False,
    executor: Optional[Executor] = None,
    log_sink: Optional[list] = None,
) -> ConsensusDecision:
    """Select-or-abstain over the scheme ladder.

    Schemes run in order: enumerator/inverse cascade, forward/set-valued
    inverse, forward/inverse. The first scheme whose RANSAC consensus selects
    a class wins; if every scheme fails, the decision is an abstention.
    """
    if not forward:
        raise ValueError("forward samples must be non-empty")
    cfg = cfg or EvalConfig()
    own = executor is None
    executor = executor or Executor(cfg.execution)
    log = log_sink if log_sink is not None else []
    try:
        fclasses = cluster(forward, test_inputs, cfg, executor)
        freps = {c.class_id: _rep(forward, c.representative) for c in fclasses}
        check_inputs = pointwise_view(test_inputs) if stream else test_inputs
        fwd_scheme = lambda s: Stream(s) if stream else s  # noqa: E731

        # Observations drive witness clustering and reverse-quantifier domains.
        observations = []
        seen = set()
        view = check_inputs
        for c in fclasses:
            rep = freps[c.class_id]
            rep_view = _stream_view(rep) if stream else rep
            for args in view.inputs:
                out = executor.execute(rep_view, args).value
                key = (args_key(args), outcome_fingerprint(out))
                if key not in seen:
                    seen.add(key)
                    observations.append((args, out))
        arity = len(view.inputs[0])
        inv_index = partial_arg if partial_arg is not None else (0 if arity == 1 else -1)

        if enum_samples and sinv_samples:
            decision = _cascade_stage(
                fclasses, freps, enum_samples, sinv_samples, test_inputs,
                cfg, executor, log, partial_arg=partial_arg, stream=stream,
            )
            if isinstance(decision, Selected):
                return decision

        witness_inputs = _derived_witness_inputs(
            test_inputs.problem_id, observations, arity, inv_index
        )
        for scheme, witnesses in (
            (fwd_scheme(_sinv_scheme(partial_arg)), sinv_samples),
            (fwd_scheme(_inv_scheme(partial_arg)), inv_samples),
        ):
            if not witnesses or witness_inputs is None:
                continue
            wclasses = cluster(witnesses, witness_inputs, cfg, executor)
            wreps = {c.class_id: _rep(witnesses, c.representative) for c in wclasses}

            def agree(pcls, wcls, _scheme=scheme):
                verdict = check_agreement(
                    _scheme,
                    freps[pcls.class_id],
                    wreps[wcls.class_id],
                    test_inputs,
                    cfg,
                    executor,
                )
                log.append(
                    VerdictRecord(
                        test_inputs.problem_id,
                        scheme_name(_scheme),
                        pcls.class_id,
                        wcls.class_id,
                        verdict.agrees,
                        verdict.counterexample[0] if verdict.counterexample else None,
                    )
                )
                return verdict.agrees

            matrix = agreement_matrix(fclasses, wclasses, agree)
            decision = ransac(matrix, _sizes(fclasses), _sizes(wclasses))
            if isinstance(decision, Selected):
                return Selected(
                    decision.class_id,
                    decision.representative,
                    scheme_name(scheme),
                    decision.score,
                )
        return Abstained("all schemes failed", "tri")
    finally:
        if own:
            executor.close()


def _sinv_scheme(partial_arg: Optional[int]) -> Scheme:
    return PartialFwdSinv(partial_arg) if partial_arg is not None else FullFwdSinv()


def _inv_scheme(partial_arg: Optional[int]) -> Scheme:
    return PartialFwdInv(partial_arg) if partial_arg is not None else FullFwdInv()


def _rep(candidates: Sequence[CandidateProgram], cid: str) -> CandidateProgram:
    for c in candidates:
        if c.id == cid:
            return c
    raise KeyError(cid)


def pointwise_view(test_inputs: TestInputSet) -> TestInputSet:
    from .schemes import pointwise_inputs

    return pointwise_inputs(test_inputs)


def _stream_view(candidate: CandidateProgram) -> CandidateProgram:
    from .schemes import stream_lift

    return stream_lift(candidate)


def _cascade_stage(
    fclasses: Sequence[EquivalenceClass],
    freps: Mapping[str, CandidateProgram],
    enum_samples: Sequence[CandidateProgram],
    sinv_samples: Sequence[CandidateProgram],
    test_inputs: TestInputSet,
    cfg: EvalConfig,
    executor: Executor,
    log: list,
    *,
    partial_arg: Optional[int],
    stream: bool,
) -> ConsensusDecision:
    stage1_inputs = pointwise_view(test_inputs) if stream else test_inputs
    eclasses = cluster(enum_samples, stage1_inputs, cfg, executor)
    ereps = {c.class_id: _rep(enum_samples, c.representative) for c in eclasses}
    arity = len(stage1_inputs.inputs[0])
    inv_index = partial_arg if partial_arg is not None else (0 if arity == 1 else -1)

    # Enumerators output sets; the inverse side consumes their elements
    # (and the forward classes' outputs, which widen the checked domain).
    from .values import Normal, SetVal

    element_observations = []
    for c in eclasses:
        rep = ereps[c.class_id]
        for args in stage1_inputs.inputs:
            out = executor.execute(rep, args).value
            if isinstance(out, SetVal):
                element_observations.extend(
                    (args, e) for e in out.elements if isinstance(e, Normal)
                )
            else:
                element_observations.append((args, out))
    for c in fclasses:
        rep = freps[c.class_id]
        rep_view = _stream_view(rep) if stream else rep
        for args in stage1_inputs.inputs:
            element_observations.append((args, executor.execute(rep_view, args).value))
    sinv_inputs = _derived_witness_inputs(
        test_inputs.problem_id, element_observations, arity, inv_index
    )
    if sinv_inputs is None:
        return Abstained("no usable enumerator outputs", "enum-sinv-cascade")
    sclasses = cluster(sinv_samples, sinv_inputs, cfg, executor)
    sreps = {c.class_id: _rep(sinv_samples, c.representative) for c in sclasses}

    result = cascade_enum_sinv(
        [freps[c.class_id] for c in fclasses],
        [ereps[c.class_id] for c in eclasses],
        [sreps[c.class_id] for c in sclasses],
        test_inputs,
        cfg,
        partial_arg=partial_arg,
        stream=stream,
        executor=executor,
    )
    log.extend(result.log)
    surviving = {e.id for e in result.surviving_enumerators}
    surviving_eclasses = [c for c in eclasses if ereps[c.class_id].id in surviving]
    if not surviving_eclasses:
        return Abstained("no surviving enumerator", "enum-sinv-cascade")

    stage2 = {(r.p_id, r.q_id): r.agrees for r in result.log if "fwd-enum" in r.scheme}

    def agree(pcls, wcls):
        return stage2.get((freps[pcls.class_id].id, ereps[wcls.class_id].id), False)

    matrix = agreement_matrix(fclasses, surviving_eclasses, agree)
    decision = ransac(matrix, _sizes(fclasses), _sizes(surviving_eclasses))
    if isinstance(decision, Selected):
        return Selected(
            decision.class_id, decision.representative, "enum-sinv-cascade", decision.score
        )
    return decision
