import torch
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.exceptions.segmentation_exceptions import ShapeError


class McConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    num_passes: int = Field(10, ge=1)
    alpha: float = Field(2.0, ge=0.0)
    base_seed: int = 0


class SoftLabelRecord(BaseModel):
    """
    Teacher output for one unlabeled image.

    `soft_label` is the MC-averaged score map (C, H, W); `uncertainty` and
    `confidence` are (H, W) grids. Tensors live on the CPU.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    soft_label: torch.Tensor
    uncertainty: torch.Tensor
    confidence: torch.Tensor
    source_image_id: str = Field(min_length=1)
    teacher_checkpoint_id: str = Field(min_length=1)
    mc_config: McConfig

    @model_validator(mode="after")
    def _check_shapes(self) -> "SoftLabelRecord":
        if self.soft_label.dim() != 3:
            raise ShapeError(
                f"soft label must be (C, H, W), got {tuple(self.soft_label.shape)}"
            )
        spatial = tuple(self.soft_label.shape[1:])
        for name in ("uncertainty", "confidence"):
            grid = getattr(self, name)
            if tuple(grid.shape) != spatial:
                raise ShapeError(
                    f"{name} grid {tuple(grid.shape)} does not match soft label "
                    f"spatial shape {spatial}"
                )
        return self
