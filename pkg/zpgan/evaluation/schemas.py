# zpgan/evaluation/schemas.py
from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from zpgan.data.schemas import HEIGHT, WIDTH

N_CHANNELS = 5
DEFAULT_BINS = 40

# (row_lo, row_hi, col_lo, col_hi), half-open
Region = Tuple[int, int, int, int]


class ChannelGeometry(BaseModel):
    """Pixel regions read out as channels 1-4; channel 5 is always the full image.

    Defaults to four equal quadrants; swap in the real tower layout here.
    """

    model_config = ConfigDict(extra="forbid")

    regions: List[Region] = Field(
        default_factory=lambda: [
            (0, HEIGHT // 2, 0, WIDTH // 2),
            (0, HEIGHT // 2, WIDTH // 2, WIDTH),
            (HEIGHT // 2, HEIGHT, 0, WIDTH // 2),
            (HEIGHT // 2, HEIGHT, WIDTH // 2, WIDTH),
        ]
    )

    @field_validator("regions")
    @classmethod
    def _four_valid_regions(cls, v: List[Region]) -> List[Region]:
        if len(v) != N_CHANNELS - 1:
            raise ValueError(f"expected {N_CHANNELS - 1} regions, got {len(v)}")
        for r0, r1, c0, c1 in v:
            if not (0 <= r0 < r1 <= HEIGHT and 0 <= c0 < c1 <= WIDTH):
                raise ValueError(f"region {(r0, r1, c0, c1)} outside the {HEIGHT}x{WIDTH} grid")
        return v


class ChannelValues(BaseModel):
    ch1: float
    ch2: float
    ch3: float
    ch4: float
    ch5: float

    def as_list(self) -> List[float]:
        return [self.ch1, self.ch2, self.ch3, self.ch4, self.ch5]


class ChannelHistogram(BaseModel):
    channel: int = Field(..., ge=1, le=N_CHANNELS)
    edges: List[float]
    counts_true: List[int]
    counts_gen: List[int]

    @model_validator(mode="after")
    def _shapes(self):
        if not (len(self.counts_true) == len(self.counts_gen) == len(self.edges) - 1):
            raise ValueError("histogram needs len(edges) - 1 counts for each set")
        return self

    @property
    def n_bins(self) -> int:
        return len(self.counts_true)


class EvalConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    samples_per_condition: int = Field(8, ge=1)
    n_bins: int = Field(DEFAULT_BINS, ge=2)
    seed: int = 0
    geometry: ChannelGeometry = Field(default_factory=ChannelGeometry)


class EvalReport(BaseModel):
    per_channel_ws: List[float]
    mean_ws: float
    center_error_mean: float
    intensity_gap: float
    histograms: List[ChannelHistogram]
    n_samples: int
    n_true: int
    seed: Optional[int] = None

    @model_validator(mode="after")
    def _mean_matches(self):
        if len(self.per_channel_ws) != N_CHANNELS:
            raise ValueError(f"expected {N_CHANNELS} per-channel distances")
        expected = sum(self.per_channel_ws) / N_CHANNELS
        if abs(self.mean_ws - expected) > 1e-9 * max(1.0, abs(expected)):
            raise ValueError("mean_ws must be the mean of per_channel_ws")
        return self
