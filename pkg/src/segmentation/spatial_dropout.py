from dataclasses import dataclass
from typing import Optional

import torch
from torch import nn

from src.exceptions.segmentation_exceptions import ConfigurationError


@dataclass(frozen=True)
class DropoutContext:
    """
    Dropout switch threaded through a forward pass.

    Each pass owns its generator, so concurrent passes never share RNG state.
    A missing generator falls back to torch's global RNG.
    """

    active: bool = False
    generator: Optional[torch.Generator] = None

    @classmethod
    def seeded(cls, seed: int) -> "DropoutContext":
        generator = torch.Generator(device="cpu")
        generator.manual_seed(seed)
        return cls(active=True, generator=generator)


INACTIVE = DropoutContext()


class SpatialDropout(nn.Module):
    """Zeroes whole feature maps with probability `rate`; survivors are rescaled."""

    def __init__(self, rate: float):
        super().__init__()
        if not 0.0 <= rate < 1.0:
            raise ConfigurationError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate

    def forward(self, x: torch.Tensor, context: DropoutContext = INACTIVE):
        if not context.active or self.rate == 0.0:
            return x
        # one draw per (sample, channel), broadcast over H and W
        noise = torch.rand(
            (x.shape[0], x.shape[1], 1, 1),
            generator=context.generator,
            dtype=torch.float64,
        )
        keep = (noise >= self.rate).to(device=x.device, dtype=x.dtype)
        return x * keep / (1.0 - self.rate)

    def extra_repr(self) -> str:
        return f"rate={self.rate}"
