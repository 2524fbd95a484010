# zpgan/training/schemas.py
import itertools
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator

from zpgan.losses.schemas import LossBreakdown, LossWeights
from zpgan.nets.schemas import ArchitectureConfig

# loss-weight sweep, logarithmically spaced
DEFAULT_GRID_DIV = [1e-2, 1e-1, 1e0]
DEFAULT_GRID_IN = [1e-7, 1e-8, 1e-9, 1e-10, 1e-11]
DEFAULT_GRID_AUX = [1e-4, 1e-3, 1e-2]
DEFAULT_RUNS_PER_CELL = 5


class TrainConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    epochs: int = Field(20, ge=0)
    batch_size: int = Field(32, ge=2)
    learning_rate_g: float = Field(2e-4, gt=0)
    learning_rate_d: float = Field(2e-4, gt=0)
    learning_rate_r: float = Field(1e-3, gt=0)
    optimizer: Literal["adam", "sgd"] = "adam"
    adam_beta1: float = Field(0.5, ge=0, lt=1)
    adam_beta2: float = Field(0.999, ge=0, lt=1)
    adam_eps: float = Field(1e-8, gt=0)
    weights: LossWeights = Field(default_factory=LossWeights)
    seed: int = 0
    strict_deterministic: bool = True
    saturating_g_loss: bool = False
    diversity_eps: float = Field(1e-4, gt=0)
    checkpoint_every: int = Field(0, ge=0)
    architecture: ArchitectureConfig = Field(default_factory=ArchitectureConfig)


class StepLog(BaseModel):
    step: int
    epoch: int
    batch_index: int
    generator: LossBreakdown
    d_loss: float
    r_loss: float


class TrainLog(BaseModel):
    steps: List[StepLog] = Field(default_factory=list)
    # wall-clock, kept out of train_log.jsonl
    epoch_seconds: List[float] = Field(default_factory=list)


class TensorSpec(BaseModel):
    name: str
    shape: List[int]


class CheckpointMeta(BaseModel):
    architecture: ArchitectureConfig
    seed: int
    step: int = 0
    epoch: int = 0
    weights: LossWeights = Field(default_factory=LossWeights)
    train_config: Optional[TrainConfig] = None
    split_ratio: Optional[float] = None
    split_seed: Optional[int] = None
    data_dir: Optional[str] = None
    tensors: List[TensorSpec] = Field(default_factory=list)


class GridSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    lambda_div: List[float] = Field(default_factory=lambda: list(DEFAULT_GRID_DIV))
    lambda_in: List[float] = Field(default_factory=lambda: list(DEFAULT_GRID_IN))
    lambda_aux: List[float] = Field(default_factory=lambda: list(DEFAULT_GRID_AUX))

    @field_validator("lambda_div", "lambda_in", "lambda_aux")
    @classmethod
    def _non_empty(cls, v: List[float]) -> List[float]:
        if not v:
            raise ValueError("grid value lists must be non-empty")
        return v

    def cells(self) -> List[LossWeights]:
        return [
            LossWeights(lambda_div=d, lambda_in=i, lambda_aux=a)
            for d, i, a in itertools.product(self.lambda_div, self.lambda_in, self.lambda_aux)
        ]


class GridCellResult(BaseModel):
    cell_index: int
    lambda_div: float
    lambda_in: float
    lambda_aux: float
    run_ws: List[float] = Field(default_factory=list)
    mean_ws: Optional[float] = None
    std_ws: Optional[float] = None
    min_ws: Optional[float] = None
    rank: Optional[int] = None
    status: Literal["ok", "failed"] = "ok"
    error: Optional[str] = None


class GridResults(BaseModel):
    runs_per_cell: int
    seed: int
    cells: List[GridCellResult]


class AblationVariant(BaseModel):
    name: str
    weights: LossWeights


class AblationRun(BaseModel):
    seed: int
    mean_ws: float
    intensity_gap: float
    center_error_mean: float


class AblationRow(BaseModel):
    name: str
    weights: LossWeights
    runs: List[AblationRun]
    mean_ws: float
    median_ws: float
    std_ws: float
    median_intensity_gap: float
    median_center_error: float


class AblationTable(BaseModel):
    rows: List[AblationRow]

    def row(self, name: str) -> AblationRow:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)

    def summary(self) -> List[Tuple[str, float, float]]:
        return [(r.name, r.mean_ws, r.std_ws) for r in self.rows]
