"""Pydantic models for experiment configs, schedules, bound reports and sweep results."""

import math
from typing import Annotated, Literal

import jsonref
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .config import (
    DEFAULT_BALL_RADIUS,
    DEFAULT_C_MULT,
    DEFAULT_GEOMETRY,
    DEFAULT_INSTANCES,
    DEFAULT_M_LIST,
    DEFAULT_MASTER_SEED,
    DEFAULT_RHO,
    N_EVAL,
    TASK_DIMENSION,
    TASK_LABEL_PRIOR,
    TASK_SIGMA_R2,
    Algorithm,
    MixingRule,
    Regime,
    StepSizePreset,
    default_step_size,
)


def resolve_jsonref(obj):
    """Recursively resolve jsonref.JsonRef objects."""
    if isinstance(obj, dict):
        return {k: resolve_jsonref(v) for k, v in obj.items()}
    elif isinstance(obj, list):
        return [resolve_jsonref(item) for item in obj]
    elif isinstance(obj, jsonref.JsonRef):
        return obj.resolved
    else:
        return obj


class ExtendedBaseModel(BaseModel):
    model_config = ConfigDict(extra="forbid", json_schema_extra={"additionalProperties": False})

    @classmethod
    def model_json_schema(cls, *args, **kwargs):
        schema = super().model_json_schema(*args, **kwargs)
        schema = jsonref.replace_refs(schema)
        schema = resolve_jsonref(schema)
        schema.pop("$defs", None)
        return schema


# Experiment configuration


class GraphFamily(ExtendedBaseModel):
    kind: Literal["complete", "k_regular", "erdos_renyi", "path", "ring"] = Field(..., description="Graph family")
    k: int | None = Field(None, description="Degree for k_regular graphs")
    p: float | None = Field(None, description="Edge probability for erdos_renyi graphs")

    @model_validator(mode="after")
    def check_parameters(self):
        if self.kind == "k_regular" and self.k is None:
            raise ValueError("k_regular graphs need k")
        if self.kind == "erdos_renyi" and self.p is None:
            raise ValueError("erdos_renyi graphs need p")
        return self


class ExplicitBatch(ExtendedBaseModel):
    rule: Literal["explicit"] = Field("explicit", description="Use a fixed mini-batch size")
    b: int = Field(..., ge=1, description="Mini-batch size")


class CorollaryBatch(ExtendedBaseModel):
    rule: Literal["corollary"] = Field("corollary", description="Size the mini-batch from log(mT) / (rho log(1/lambda2))")
    c_mult: float = Field(DEFAULT_C_MULT, gt=0, description="Multiplicative constant of the sizing rule")


BatchRule = Annotated[ExplicitBatch | CorollaryBatch, Field(discriminator="rule")]


class TaskParams(ExtendedBaseModel):
    dimension: int = Field(TASK_DIMENSION, ge=1, description="Feature dimension d")
    sigma_r2: float = Field(TASK_SIGMA_R2, ge=0, description="Class covariance scale")
    label_prior: float = Field(TASK_LABEL_PRIOR, gt=0, lt=1, description="Probability of label 1")


class EvalParams(ExtendedBaseModel):
    n_eval: int = Field(N_EVAL, ge=1, description="Holdout size defining the surrogate objective")
    trace_rounds: Literal["all", "final"] = Field("final", description="Rounds at which gaps are evaluated")
    per_node: bool = Field(False, description="Also emit one trace row per node")
    cache_holdout: bool = Field(True, description="Cache holdouts under DSAMD_CACHE_DIR when it is set")


class DomainSpec(ExtendedBaseModel):
    geometry: str = Field(DEFAULT_GEOMETRY, description='Geometry name: "euclidean" or "pnorm:<p>"')
    kind: Literal["ball", "box", "unbounded"] = Field("ball", description="Feasible set shape")
    radius: float = Field(DEFAULT_BALL_RADIUS, gt=0, description="Ball radius around the origin")
    lower: float = Field(-DEFAULT_BALL_RADIUS, description="Box lower bound, every coordinate")
    upper: float = Field(DEFAULT_BALL_RADIUS, description="Box upper bound, every coordinate")

    @model_validator(mode="after")
    def check_box(self):
        if self.kind == "box" and not self.lower < self.upper:
            raise ValueError("box needs lower < upper")
        return self


class AlgorithmSpec(ExtendedBaseModel):
    name: Algorithm = Field(..., description="Algorithm to run")
    gamma: float | None = Field(None, gt=0, description="Base step size; the preset table is used when omitted")
    central_batch: Literal["m", "mb"] = Field("m", description="Centralized baselines: step per data round (m) or per mini-batch round (m*b)")
    clip_gamma: bool = Field(False, description="Clip the base step size to alpha/(2 L_est)")


class ExperimentConfig(ExtendedBaseModel):
    graph: GraphFamily = Field(..., description="Communication graph family")
    mixing: MixingRule | None = Field(None, description="Mixing rule; mean for complete graphs, metropolis otherwise")
    regime: Regime = Field(Regime.T_EQ_M, description="How T grows with m")
    T: int | None = Field(None, ge=1, description="Horizon for the explicit regime")
    m_list: list[int] = Field(default_factory=lambda: list(DEFAULT_M_LIST), min_length=1, description="Network sizes to sweep")
    rho: float = Field(DEFAULT_RHO, gt=0, description="Communication rounds per data-acquisition round")
    algorithms: list[AlgorithmSpec] = Field(..., min_length=1, description="Algorithms run on every instance")
    b_rule: BatchRule = Field(default_factory=lambda: ExplicitBatch(b=2), description="Mini-batch sizing rule")
    instance_count: int = Field(DEFAULT_INSTANCES, ge=1, description="Monte Carlo instances per network size")
    master_seed: int = Field(DEFAULT_MASTER_SEED, ge=0, description="Seed every instance seed is derived from")
    step_size_preset: StepSizePreset | None = Field(None, description="Step-size table; fully_connected for complete graphs, sparse otherwise")
    task: TaskParams = Field(default_factory=TaskParams, description="Synthetic logistic task")
    eval: EvalParams = Field(default_factory=EvalParams, description="Gap evaluation")
    domain: DomainSpec = Field(default_factory=DomainSpec, description="Geometry and feasible set")
    nonsmooth_lipschitz: float = Field(0.0, ge=0, description="Lipschitz constant M of the nonsmooth part, for the bounds")
    nonsmooth_term: Literal["squared", "verbatim"] = Field("squared", description="Use 4M^2 or 4M in the noise moments")

    @model_validator(mode="after")
    def check_consistency(self):
        if self.regime == Regime.EXPLICIT and self.T is None:
            raise ValueError("explicit regime needs T")
        if any(m < 1 for m in self.m_list):
            raise ValueError("every m must be at least 1")
        if self.mixing == MixingRule.MEAN_FOR_COMPLETE and self.graph.kind != "complete":
            raise ValueError("mean mixing needs a complete graph")
        return self

    def horizon(self, m: int) -> int:
        if self.regime == Regime.T_EQ_M:
            return m
        if self.regime == Regime.T_EQ_SQRT_M:
            return max(1, round(math.sqrt(m)))
        return self.T

    def mixing_rule(self) -> MixingRule:
        if self.mixing is not None:
            return self.mixing
        return MixingRule.MEAN_FOR_COMPLETE if self.graph.kind == "complete" else MixingRule.METROPOLIS

    def preset(self) -> StepSizePreset:
        if self.step_size_preset is not None:
            return self.step_size_preset
        return StepSizePreset.FULLY_CONNECTED if self.graph.kind == "complete" else StepSizePreset.SPARSE

    def step_size(self, spec: AlgorithmSpec) -> float:
        if spec.gamma is not None:
            return spec.gamma
        return default_step_size(spec.name, self.preset(), self.regime)


# Rate schedule


class RateSchedule(ExtendedBaseModel):
    model_config = ConfigDict(frozen=True)

    rho: float = Field(..., gt=0, description="Communications ratio")
    T: int = Field(..., ge=1, description="Data-acquisition rounds")
    b: int = Field(..., ge=1, description="Mini-batch size")
    r: int = Field(..., ge=0, description="Consensus rounds per mini-batch round")
    S: int = Field(..., ge=0, description="Search-point rounds")
    clamped: bool = Field(False, description="Corollary batch size was cut down to the horizon T")

    @property
    def discarded(self) -> int:
        """Samples per node left over after the last complete mini-batch."""
        return self.T - self.S * self.b


# Bounds


class ProblemConstants(ExtendedBaseModel):
    L: float = Field(..., ge=0, description="Lipschitz constant of the smooth gradient")
    M: float = Field(0.0, ge=0, description="Lipschitz constant of the nonsmooth part")
    sigma2: float = Field(..., ge=0, description="Subgradient noise variance")
    alpha: float = Field(1.0, gt=0, description="Strong-convexity modulus of omega")
    c_star: float = Field(1.0, ge=1, description="Variance-averaging constant of the norm pair")
    d_omega: float = Field(..., ge=0, description="omega-radius of the feasible set")
    omega_radius: float = Field(..., ge=0, description="sqrt(2 d_omega^2 / alpha)")


class BoundInputs(ExtendedBaseModel):
    m: int = Field(..., ge=1, description="Node count")
    lambda2: float = Field(..., ge=0, lt=1, description="Second-largest eigenvalue magnitude of W")
    r: int = Field(..., ge=0, description="Consensus rounds")
    b: int = Field(..., ge=1, description="Mini-batch size")
    S: int = Field(..., ge=1, description="Search-point rounds")
    gamma: float = Field(..., gt=0, description="Base step size")


class BoundReport(ExtendedBaseModel):
    variant: Literal["dsamd", "adsamd"]
    S: int
    terms: list[float] = Field(..., description="Deterministic, noise and consensus-bias terms")
    total: float
    gamma_star: float
    xi: float
    delta2: float


class CorollaryReport(ExtendedBaseModel):
    variant: Literal["dsamd", "adsamd"]
    m: int
    T: int
    rho: float
    lambda2: float
    b: int = Field(..., description="Mini-batch size checked against the conditions")
    b_min: int
    b_max: float
    rho_min: float
    T_min: float
    M_max: float
    satisfied: dict[str, bool]


# Sweep results


class TraceRecord(ExtendedBaseModel):
    algorithm: Algorithm
    gamma: float
    rounds: list[int]
    samples: list[int]
    mean_gaps: list[float]
    node_gaps: list[list[float]] = Field(default_factory=list, description="Per recorded round, one gap per node")
    metadata: dict[str, str | int | float] = Field(default_factory=dict)

    @property
    def final_gap(self) -> float:
        return self.mean_gaps[-1]


class InstanceRecord(ExtendedBaseModel):
    m: int
    T: int
    instance: int
    instance_seed: int
    lambda2: float
    graph_attempts: int
    schedule: RateSchedule
    sigma2_est: float
    L_est: float
    mu0: list[float]
    mu1: list[float]
    traces: list[TraceRecord]


class Aggregate(ExtendedBaseModel):
    mean: float
    stderr: float
    count: int


class BoundOverlay(ExtendedBaseModel):
    reference: float = Field(..., description="1/sqrt(mT)")
    dsamd: BoundReport | None = None
    adsamd: BoundReport | None = None


class SweepPoint(ExtendedBaseModel):
    m: int
    T: int
    schedule: RateSchedule = Field(..., description="Schedule of the first instance; random families may differ per instance")
    mean_lambda2: float
    aggregates: dict[str, Aggregate]
    overlay: BoundOverlay


class SweepResult(ExtendedBaseModel):
    config: ExperimentConfig
    points: list[SweepPoint] = Field(default_factory=list)
    records: list[InstanceRecord] = Field(default_factory=list)
    slopes: dict[str, float | None] = Field(default_factory=dict)
