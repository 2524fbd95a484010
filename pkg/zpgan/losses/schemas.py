# zpgan/losses/schemas.py
import math

from pydantic import BaseModel, ConfigDict, Field, field_validator

# best cell of the appendix sweep
DEFAULT_LAMBDA_DIV = 1e-1
DEFAULT_LAMBDA_IN = 1e-10
DEFAULT_LAMBDA_AUX = 1e-3


class LossWeights(BaseModel):
    model_config = ConfigDict(extra="forbid")

    lambda_div: float = Field(DEFAULT_LAMBDA_DIV, ge=0)
    lambda_in: float = Field(DEFAULT_LAMBDA_IN, ge=0)
    lambda_aux: float = Field(DEFAULT_LAMBDA_AUX, ge=0)

    @field_validator("lambda_div", "lambda_in", "lambda_aux")
    @classmethod
    def _finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("loss weights must be finite")
        return v

    @classmethod
    def plain_gan(cls) -> "LossWeights":
        return cls(lambda_div=0.0, lambda_in=0.0, lambda_aux=0.0)


class LossBreakdown(BaseModel):
    adv: float
    div: float = Field(..., ge=0)
    intensity: float = Field(..., ge=0)
    aux: float = Field(..., ge=0)
    total: float
