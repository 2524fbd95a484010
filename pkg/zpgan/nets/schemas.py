# zpgan/nets/schemas.py
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from zpgan.data.schemas import COND_DIM, HEIGHT, WIDTH


class ArchitectureConfig(BaseModel):
    """Layer sizes of the three networks.

    The defaults build the 56x30 model: a 7x5 seed grid upsampled by three
    stride-2 blocks to 56x40, then center-cropped to 56x30.
    """

    model_config = ConfigDict(extra="forbid")

    latent_dim: int = Field(10, gt=0)
    base_channels: int = Field(16, gt=0)
    conditioning_embed_dim: int = Field(16, gt=0)
    output_activation: Literal["softplus", "relu"] = "softplus"

    height: int = Field(HEIGHT, gt=0)
    width: int = Field(WIDTH, gt=0)
    cond_dim: int = Field(COND_DIM, gt=0)
    n_blocks: int = Field(3, gt=0)
    seed_height: int = Field(7, gt=0)
    seed_width: int = Field(5, gt=0)

    @model_validator(mode="after")
    def _seed_covers_image(self):
        scale = 2 ** self.n_blocks
        if self.seed_height * scale < self.height or self.seed_width * scale < self.width:
            raise ValueError(
                f"seed grid {self.seed_height}x{self.seed_width} upsampled x{scale} "
                f"does not cover {self.height}x{self.width}"
            )
        return self

    @classmethod
    def toy(cls) -> "ArchitectureConfig":
        """4x4 images, two blocks; small enough for exhaustive finite differences."""
        return cls(
            latent_dim=3,
            base_channels=2,
            conditioning_embed_dim=4,
            height=4,
            width=4,
            n_blocks=2,
            seed_height=1,
            seed_width=1,
        )


class GradCheckReport(BaseModel):
    max_relative_error: float
    probes: int
    tolerance: float
    passed: bool
    worst_name: Optional[str] = None
    worst_index: Optional[int] = None
