from datetime import datetime

from pydantic import BaseModel, ConfigDict, Field


class ArrayPayload(BaseModel):
    shape: list[int]
    data: list[float]


class ControllerCheckpoint(BaseModel):
    version: int
    library_size: int
    hidden_size: int
    embedding_size: int
    params: dict[str, ArrayPayload]
    adam_step: int = 0
    adam_m: dict[str, ArrayPayload] = Field(default_factory=dict)
    adam_v: dict[str, ArrayPayload] = Field(default_factory=dict)


class Metrics(BaseModel):
    model_config = ConfigDict(frozen=True)

    accuracy: float = Field(ge=0.0, le=1.0)
    precision: float = Field(ge=0.0, le=1.0)
    recall: float = Field(ge=0.0, le=1.0)
    f1: float = Field(ge=0.0, le=1.0)
    f2: float = Field(ge=0.0, le=1.0)


class HallOfFameEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    expression: str
    traversal: list[int]
    reward: float = Field(ge=0.0, le=1.0)
    complexity: int = Field(ge=1)
    metrics: Metrics


class BatchStats(BaseModel):
    batch: int
    max_reward: float
    mean_reward: float
    quantile: float
    best_so_far: float


class RunMetadata(BaseModel):
    created_at: datetime
    duration_seconds: float | None = None


class TrainResult(BaseModel):
    method: str
    reward_kind: str
    mode: str
    seed: int
    feature_names: list[str]
    hall_of_fame: list[HallOfFameEntry]
    best: HallOfFameEntry
    reward_curve: list[BatchStats]
    n_batches: int
    # Timestamps only live here, so everything else is reproducible byte for byte.
    metadata: RunMetadata | None = None


class SeedBest(BaseModel):
    seed: int
    expression: str
    complexity: int
    reward: float
    metrics: Metrics


class SweepSummary(BaseModel):
    method: str
    reward_kind: str
    mode: str
    per_seed: list[SeedBest]
    mean_best: Metrics
    mean_best_reward: float


class FuzzifierModel(BaseModel):
    percentiles: list[int] = Field(default_factory=lambda: [20, 40, 60, 80])
    cutpoints: dict[str, list[float]]
    binary_columns: list[str]
    columns: list[str]


class SplitSummary(BaseModel):
    rows: int
    frauds: int
    fraud_rate: float


class PrepareSummary(BaseModel):
    source: str
    train: SplitSummary
    test: SplitSummary
    columns: list[str]
    noise_level: float


class ReportRow(BaseModel):
    method: str
    reward_kind: str
    mode: str
    row: str  # "best" or "average"
    n_seeds: int
    expression: str | None = None
    infix: str | None = None
    complexity: float
    metrics: Metrics


class ParetoPointModel(BaseModel):
    complexity: int
    reward: float
    expression: str


class ComparisonReport(BaseModel):
    threshold: float
    selection_metric: str
    rows: list[ReportRow]
    pareto_front: list[ParetoPointModel]
    metadata: RunMetadata | None = None
