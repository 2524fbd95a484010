# zpgan/data/schemas.py
import math
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

HEIGHT = 56
WIDTH = 30
COND_DIM = 9
N_PIXELS = HEIGHT * WIDTH
FORMAT_VERSION = 1


class ConditioningVector(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    energy: float = Field(..., gt=0)
    mass: float = Field(..., ge=0)
    charge: float
    position: Tuple[float, float, float]
    momentum: Tuple[float, float, float]

    @model_validator(mode="after")
    def _all_finite(self):
        if not all(math.isfinite(v) for v in self.as_array().tolist()):
            raise ValueError("conditioning vector components must be finite")
        return self

    def as_array(self, dtype=np.float32) -> np.ndarray:
        return np.array(
            [self.energy, self.mass, self.charge, *self.position, *self.momentum],
            dtype=dtype,
        )

    @classmethod
    def from_array(cls, values) -> "ConditioningVector":
        v = [float(x) for x in np.asarray(values).reshape(-1)]
        if len(v) != COND_DIM:
            raise ValueError(f"expected {COND_DIM} conditioning components, got {len(v)}")
        return cls(energy=v[0], mass=v[1], charge=v[2], position=tuple(v[3:6]), momentum=tuple(v[6:9]))


class SynthProfile(BaseModel):
    """Knobs of the synthetic ZP-like generator.

    Shower widths must be positive; jitter and intensity noise may be zero,
    which collapses every group to identical responses.
    """

    model_config = ConfigDict(extra="forbid")

    blob_sigma_k: float = 2.5
    blob_sigma_l: float = 2.0
    center_gain_k: float = 14.0
    center_gain_l: float = 7.0
    jitter_scale: float = 3.0
    intensity_scale: float = 60.0
    intensity_noise: float = 0.4
    energy_min: float = 1.0
    energy_max: float = 8.0

    @field_validator("blob_sigma_k", "blob_sigma_l", "intensity_scale", "energy_min")
    @classmethod
    def _positive(cls, v: float) -> float:
        if not v > 0:
            raise ValueError("spread and scale parameters must be positive")
        return v

    @field_validator("jitter_scale", "intensity_noise", "center_gain_k", "center_gain_l")
    @classmethod
    def _non_negative(cls, v: float) -> float:
        if not v >= 0:
            raise ValueError("must be non-negative")
        return v

    @model_validator(mode="after")
    def _energy_range(self):
        if self.energy_max <= self.energy_min:
            raise ValueError("energy_max must exceed energy_min")
        return self


class Sample(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    condition: ConditioningVector
    response: np.ndarray
    group_id: int


class Dataset(BaseModel):
    """Samples stored column-wise.

    conditions: (n, 9) float32, responses: (n, 56, 30) float32,
    group_ids: (n,) int64, groups: group_id -> ascending sample indices.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    conditions: np.ndarray
    responses: np.ndarray
    group_ids: np.ndarray
    groups: Dict[int, List[int]]
    seed: Optional[int] = None
    profile: Optional[SynthProfile] = None

    @model_validator(mode="after")
    def _consistent(self):
        n = self.conditions.shape[0]
        if self.conditions.shape != (n, COND_DIM):
            raise ValueError(f"conditions must be (n, {COND_DIM}), got {self.conditions.shape}")
        if self.responses.shape != (n, HEIGHT, WIDTH):
            raise ValueError(f"responses must be (n, {HEIGHT}, {WIDTH}), got {self.responses.shape}")
        if self.group_ids.shape != (n,):
            raise ValueError("group_ids must have one entry per sample")
        seen = sorted(i for members in self.groups.values() for i in members)
        if seen != list(range(n)):
            raise ValueError("every sample index must appear in exactly one group")
        if not np.all(np.isfinite(self.conditions)):
            raise ValueError("conditioning vectors must be finite")
        if np.any(self.conditions[:, 0] <= 0):
            raise ValueError(f"energy must be positive, found {float(self.conditions[:, 0].min())}")
        if np.any(self.conditions[:, 1] < 0):
            raise ValueError("mass must be non-negative")
        for gid, members in self.groups.items():
            if not members:
                raise ValueError(f"group {gid} is empty")
            rows = self.conditions[members]
            if not np.array_equal(rows, np.broadcast_to(rows[0], rows.shape)):
                raise ValueError(f"group {gid} mixes different conditioning vectors")
        return self

    def __len__(self) -> int:
        return int(self.conditions.shape[0])

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    def sample(self, index: int) -> Sample:
        return Sample(
            condition=ConditioningVector.from_array(self.conditions[index]),
            response=self.responses[index],
            group_id=int(self.group_ids[index]),
        )

    def subset(self, group_ids: List[int]) -> "Dataset":
        """New dataset holding the given groups, renumbered 0..len-1 in the order given."""
        indices: List[int] = []
        groups: Dict[int, List[int]] = {}
        new_ids: List[int] = []
        for new_gid, gid in enumerate(group_ids):
            members = self.groups[gid]
            groups[new_gid] = list(range(len(indices), len(indices) + len(members)))
            indices.extend(members)
            new_ids.extend([new_gid] * len(members))
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(
            conditions=self.conditions[idx],
            responses=self.responses[idx],
            group_ids=np.asarray(new_ids, dtype=np.int64),
            groups=groups,
            seed=self.seed,
            profile=self.profile,
        )


class GroupStats(BaseModel):
    diversity_weight_raw: float = Field(..., ge=0)
    diversity_weight: float = Field(..., ge=0, le=1)
    intensity: float = Field(..., ge=0)
    center: Tuple[float, float]
    reference_index: int

    @field_validator("center")
    @classmethod
    def _inside_grid(cls, v):
        k, l = v
        if not (0 <= k < HEIGHT and 0 <= l < WIDTH):
            raise ValueError(f"center {v} outside the {HEIGHT}x{WIDTH} grid")
        return v


class DatasetStats(BaseModel):
    per_group: Dict[int, GroupStats]
    normalization_constant: float = Field(..., gt=0)


class DatasetManifest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    version: int = FORMAT_VERSION
    n_samples: int
    n_groups: int
    height: int = HEIGHT
    width: int = WIDTH
    cond_dim: int = COND_DIM
    dtype: str = "f32le"
    seed: Optional[int] = None
    profile: Optional[SynthProfile] = None
