# zpgan/cli/schemas.py
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from zpgan.core.exceptions import ConfigError
from zpgan.data.schemas import SynthProfile
from zpgan.evaluation.schemas import N_CHANNELS, EvalConfig
from zpgan.losses.schemas import LossWeights
from zpgan.training.ablation import SYNTHETIC_BENCHMARK_WEIGHTS
from zpgan.training.grid import DEFAULT_SPLIT_RATIO
from zpgan.training.schemas import DEFAULT_RUNS_PER_CELL, GridSpec, TrainConfig


class PathsConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    data: Optional[str] = None
    out: Optional[str] = None
    checkpoint: Optional[str] = None
    report: Optional[str] = None


class SynthConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seed: int = 0
    groups: int = Field(64, ge=1)
    per_group: int = Field(8, ge=2)
    profile: SynthProfile = Field(default_factory=SynthProfile)


class SplitConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    ratio: float = Field(DEFAULT_SPLIT_RATIO, gt=0, lt=1)
    # None: follow the training seed
    seed: Optional[int] = None


class EvalSection(EvalConfig):
    split: Literal["test", "train", "all"] = "test"


class GridConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    spec: GridSpec = Field(default_factory=GridSpec)
    runs_per_cell: int = Field(DEFAULT_RUNS_PER_CELL, ge=1)
    jobs: Optional[int] = Field(None, ge=0)
    backend: Optional[Literal["local", "celery"]] = None


class PlotConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    channels: List[int] = Field(default_factory=lambda: [4, 5])
    samples: int = Field(0, ge=0)
    seed: int = 0

    @field_validator("channels")
    @classmethod
    def _known_channels(cls, v: List[int]) -> List[int]:
        if not v or any(not 1 <= ch <= N_CHANNELS for ch in v):
            raise ValueError(f"channels must be a non-empty subset of 1..{N_CHANNELS}")
        return v


class AblationConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    runs: int = Field(5, ge=1)
    weights: LossWeights = Field(default_factory=lambda: SYNTHETIC_BENCHMARK_WEIGHTS.model_copy())


class RunConfig(BaseModel):
    """Everything a command can read from the YAML file; one section per concern."""

    model_config = ConfigDict(extra="forbid")

    paths: PathsConfig = Field(default_factory=PathsConfig)
    synth: SynthConfig = Field(default_factory=SynthConfig)
    split: SplitConfig = Field(default_factory=SplitConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    eval: EvalSection = Field(default_factory=EvalSection)
    grid: GridConfig = Field(default_factory=GridConfig)
    plot: PlotConfig = Field(default_factory=PlotConfig)
    ablation: AblationConfig = Field(default_factory=AblationConfig)


# ---------------------------------------------------------------------------
# Loading and overrides
# ---------------------------------------------------------------------------

def _format_errors(exc: ValidationError) -> str:
    return "; ".join(
        f"{'.'.join(str(p) for p in err['loc']) or '<root>'}: {err['msg']}" for err in exc.errors()
    )


def read_config_file(path: Optional[str]) -> Dict[str, Any]:
    if path is None:
        return {}
    src = Path(path)
    if not src.is_file():
        raise ConfigError(f"config file not found: {src}")
    try:
        raw = yaml.safe_load(src.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {src}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config must be a mapping, got {type(raw).__name__}")
    return raw


def merge(base: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    """Nested dict merge; values from `overrides` win, None values are skipped."""
    out = dict(base)
    for key, value in overrides.items():
        if value is None:
            continue
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = merge(out[key], value)
        elif isinstance(value, dict):
            nested = merge({}, value)
            if nested:
                out[key] = nested
        else:
            out[key] = value
    return out


def build_run_config(config_path: Optional[str], overrides: Dict[str, Any]) -> RunConfig:
    """Model defaults < YAML file < command-line flags."""
    raw = merge(read_config_file(config_path), overrides)
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"invalid configuration: {_format_errors(exc)}") from exc
