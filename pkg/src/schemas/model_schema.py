from pydantic import BaseModel, ConfigDict, Field


class ModelConfig(BaseModel):
    """Dense-UNet hyper-parameters shared by the teacher and the student."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    num_classes: int = Field(9, ge=2)
    units_per_block: int = Field(4, ge=1)
    filters_per_unit: int = Field(8, ge=1)
    num_encoder_blocks: int = Field(3, ge=1)
    dropout_rate: float = Field(0.2, ge=0.0, lt=1.0)
    input_channels: int = Field(1, ge=1)

    @property
    def block_channels(self) -> int:
        """Feature maps emitted by every dense block."""
        return self.units_per_block * self.filters_per_unit

    @property
    def spatial_divisor(self) -> int:
        return 2**self.num_encoder_blocks
