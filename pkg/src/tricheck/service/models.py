"""Pydantic request/response models for the service endpoints."""

from __future__ import annotations

from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field


class CandidateModel(BaseModel):
    id: str
    problem_id: str = "problem"
    table: Dict[str, Any]  # canonical input key -> wire value / {"special": ...}


class EvalRequest(BaseModel):
    term: str  # s-expression
    candidates: List[CandidateModel] = Field(default_factory=list)
    env: Dict[str, Any] = Field(default_factory=dict)  # name -> wire value
    angelic_fraction: str = "1/3"
    timeout_ms: int = 10_000


class ForAllStatsModel(BaseModel):
    label: Optional[str]
    domain_size: int
    true_count: int
    angelic_count: int
    false_count: int
    demonic_count: int
    threshold: int
    verdict: bool


class EvalResponse(BaseModel):
    result: str  # "true" | "false" | "angelic" | "demonic" | "undefined"
    forall: List[ForAllStatsModel] = Field(default_factory=list)


class InputsModel(BaseModel):
    rows: List[List[Any]]  # wire-value argument tuples


class AgreementRequest(BaseModel):
    scheme: str
    arg_index: Optional[int] = None
    p: CandidateModel
    q: CandidateModel
    inputs: InputsModel
    angelic_fraction: str = "1/3"
    timeout_ms: int = 10_000


class AgreementResponse(BaseModel):
    agrees: bool
    counterexample_clause: Optional[str] = None
    counterexample_value: Optional[Any] = None


class ClusterRequest(BaseModel):
    candidates: List[CandidateModel]
    inputs: InputsModel
    timeout_ms: int = 10_000


class ClassModel(BaseModel):
    class_id: str
    members: List[str]
    mass: str  # "p/q"


class ClusterResponse(BaseModel):
    classes: List[ClassModel]


class ConsensusRequest(BaseModel):
    strategy: str  # "plurality" | "majority" | "ransac"
    classes: List[ClassModel] = Field(default_factory=list)
    threshold: str = "1/2"
    matrix: Optional[List[List[bool]]] = None
    program_ids: Optional[List[str]] = None
    witness_ids: Optional[List[str]] = None
    class_sizes: Optional[Dict[str, int]] = None
    witness_sizes: Optional[Dict[str, int]] = None


class DecisionModel(BaseModel):
    decision: str  # "selected" | "abstained"
    class_id: Optional[str] = None
    strategy: str = ""
    score: Optional[str] = None
    reason: Optional[str] = None


class RunRequest(BaseModel):
    manifest_path: str
    output_dir: str
    strategies: List[str] = Field(default_factory=lambda: ["tri", "plurality", "majority"])
    mode: str = "replay"
    angelic_fraction: str = "1/3"
    timeout_ms: int = 10_000
    jobs: int = 1
    seed: int = 0
    model: str = "default"
    n: int = 30
    temperature: float = 1.0
    replay_dir: Optional[str] = None
    record_dir: Optional[str] = None


class StrategyMetricsModel(BaseModel):
    counts: Dict[str, int]
    metrics: Dict[str, Optional[str]]


class RunResponse(BaseModel):
    problems: int
    decisions: List[Dict[str, Any]]
    per_strategy: Dict[str, StrategyMetricsModel]


class SimulateRequest(BaseModel):
    models: int = 1000
    trials: int = 100_000
    mc_models: int = 10
    seed: int = 0
    num_hallucination_classes: int = 2
    problems_per_class: int = 2
    num_program_classes: int = 6
    correct_per_problem: int = 1


class SimulateResponse(BaseModel):
    models: int
    trials: int
    seed: int
    min_delta: str
    all_positive: bool
    rearrangement_ok: bool
    dissociative_positive: bool
    mc_within_three_se: bool
    mc_rows: List[Dict[str, Any]]


class EntropyRequest(BaseModel):
    labels: Dict[str, List[str]]  # problem id -> class label per sample
    step: int = 5


class EntropyResponse(BaseModel):
    rows: Dict[str, List[Dict[str, float]]]
