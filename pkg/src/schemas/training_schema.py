import math
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class TrainConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    max_iterations: int = Field(40000, ge=1)
    initial_learning_rate: float = Field(1e-5, gt=0.0)
    lr_decay_factor: float = Field(0.1, gt=0.0, le=1.0)
    lr_decay_at_iteration: int = Field(10000, ge=1)
    labeled_batch: int = Field(1, ge=1)
    unlabeled_batch: int = Field(1, ge=1)
    adam_betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = Field(1e-8, gt=0.0)
    validation_interval: int = Field(500, ge=1)
    early_stop_patience: int = Field(10, ge=0)
    min_improvement: float = Field(1e-4, ge=0.0)
    precompute_soft_labels: bool = False
    seed: int = 0


class AugmentationConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    mirror_probability: float = Field(0.5, ge=0.0, le=1.0)
    rotation_range_degrees: tuple[float, float] = (-15.0, 15.0)

    @model_validator(mode="after")
    def _ordered_range(self) -> "AugmentationConfig":
        low, high = self.rotation_range_degrees
        if low > high:
            raise ValueError("rotation range lower bound exceeds upper bound")
        return self


class MetricsRow(BaseModel):
    """One row of the training metrics CSV."""

    iteration: int
    lr: float
    labeled_loss: float
    unlabeled_loss: float
    total_loss: float
    validation_loss: float
    wall_clock: float


class TrainState(BaseModel):
    iteration: int = 0
    learning_rate: float
    best_validation_loss: float = math.inf
    best_iteration: Optional[int] = None
    stale_checks: int = 0
    updates: int = 0
    labeled_batches: int = 0
    unlabeled_batches: int = 0
    stopped_early: bool = False
    history: List[MetricsRow] = []
