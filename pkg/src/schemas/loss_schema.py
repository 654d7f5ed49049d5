import math
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator


class LossConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    alpha: float = Field(2.0, ge=0.0)
    min_class_mass: float = Field(50.0, ge=0.0)
    teacher_class_weights: Optional[list[float]] = None
    """None means inverse class frequency of the labeled training set."""
    unlabeled_weight: float = Field(1.0, ge=0.0)

    @field_validator("teacher_class_weights")
    @classmethod
    def _finite_weights(cls, weights: Optional[list[float]]):
        if weights is None:
            return weights
        if any(not math.isfinite(w) or w < 0 for w in weights):
            raise ValueError("class weights must be finite and non-negative")
        return weights
