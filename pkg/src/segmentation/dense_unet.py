"""
Dense-UNet backbone shared by the teacher and the student.

Every convolution is preceded by a spatial dropout layer. Encoder blocks are
followed by 2x2 max pooling; decoder transitions are nearest-neighbour
upsampling followed by a 3x3 convolution unit. Within a dense block unit k
sees the block input concatenated with the outputs of units 1..k-1, and the
block emits the concatenation of all unit outputs.

Tensors are channel-first: images (N, input_channels, H, W), score maps
(N, num_classes, H, W).
"""

from typing import Optional

import numpy as np
import torch
import torch.nn.functional as F
from pydantic import ValidationError
from torch import nn

from src.exceptions.segmentation_exceptions import ConfigurationError, ShapeError
from src.schemas.model_schema import ModelConfig
from src.segmentation.spatial_dropout import INACTIVE, DropoutContext, SpatialDropout


class ConvUnit(nn.Module):
    def __init__(self, in_channels: int, out_channels: int, dropout_rate: float):
        super().__init__()
        self.dropout = SpatialDropout(dropout_rate)
        self.conv = nn.Conv2d(in_channels, out_channels, 3, padding=1, bias=False)
        self.norm = nn.BatchNorm2d(out_channels)

    def forward(self, x: torch.Tensor, context: DropoutContext = INACTIVE):
        return F.relu(self.norm(self.conv(self.dropout(x, context))))


class DenseBlock(nn.Module):
    def __init__(
        self, in_channels: int, units: int, filters: int, dropout_rate: float
    ):
        super().__init__()
        self.units = nn.ModuleList(
            ConvUnit(in_channels + index * filters, filters, dropout_rate)
            for index in range(units)
        )
        self.out_channels = units * filters

    def forward(self, x: torch.Tensor, context: DropoutContext = INACTIVE):
        features = [x]
        outputs = []
        for unit in self.units:
            out = unit(torch.cat(features, dim=1), context)
            features.append(out)
            outputs.append(out)
        return torch.cat(outputs, dim=1)


class UpTransition(nn.Module):
    def __init__(self, channels: int, dropout_rate: float):
        super().__init__()
        self.unit = ConvUnit(channels, channels, dropout_rate)

    def forward(self, x: torch.Tensor, context: DropoutContext = INACTIVE):
        return self.unit(F.interpolate(x, scale_factor=2, mode="nearest"), context)


class SegmentationModel(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        channels = config.block_channels
        rate = config.dropout_rate
        units = config.units_per_block
        filters = config.filters_per_unit

        self.encoder = nn.ModuleList(
            DenseBlock(
                config.input_channels if index == 0 else channels,
                units,
                filters,
                rate,
            )
            for index in range(config.num_encoder_blocks)
        )
        self.pool = nn.MaxPool2d(2)
        self.bottleneck = DenseBlock(channels, units, filters, rate)
        self.upsample = nn.ModuleList(
            UpTransition(channels, rate) for _ in range(config.num_encoder_blocks)
        )
        # upsampled features + skip connection
        self.decoder = nn.ModuleList(
            DenseBlock(2 * channels, units, filters, rate)
            for _ in range(config.num_encoder_blocks)
        )
        self.head_dropout = SpatialDropout(rate)
        self.head = nn.Conv2d(channels, config.num_classes, 1)

    def logits(self, x: torch.Tensor, context: DropoutContext = INACTIVE):
        skips = []
        for block in self.encoder:
            x = block(x, context)
            skips.append(x)
            x = self.pool(x)
        x = self.bottleneck(x, context)
        # decoder block j takes the skip of encoder block (B - j + 1)
        for up, block, skip in zip(self.upsample, self.decoder, reversed(skips)):
            x = block(torch.cat([up(x, context), skip], dim=1), context)
        return self.head(self.head_dropout(x, context))

    def forward(self, x: torch.Tensor, context: DropoutContext = INACTIVE):
        return torch.softmax(self.logits(x, context), dim=1)


def initialize_parameters(model: SegmentationModel, seed: int) -> None:
    """He-normal convolutions, unit/zero batch norm, seeded from `seed`."""
    generator = torch.Generator(device="cpu")
    generator.manual_seed(seed)
    with torch.no_grad():
        for module in model.modules():
            if isinstance(module, nn.Conv2d):
                weight = torch.empty_like(module.weight, device="cpu")
                nn.init.kaiming_normal_(
                    weight, nonlinearity="relu", generator=generator
                )
                module.weight.copy_(weight)
                if module.bias is not None:
                    module.bias.zero_()
            elif isinstance(module, nn.BatchNorm2d):
                module.reset_parameters()
                module.reset_running_stats()


def build_model(config: ModelConfig | dict, seed: int = 0) -> SegmentationModel:
    try:
        if isinstance(config, ModelConfig):
            config = ModelConfig.model_validate(config.model_dump())
        else:
            config = ModelConfig.model_validate(config)
    except ValidationError as error:
        raise ConfigurationError(f"invalid model configuration: {error}") from error

    model = SegmentationModel(config)
    initialize_parameters(model, seed)
    return model


def as_image_batch(
    image: np.ndarray | torch.Tensor, config: ModelConfig
) -> torch.Tensor:
    """
    Bring an image into (N, input_channels, H, W) float layout and check it
    against the model contract. Numpy input is read as H x W or
    H x W x channels; tensors as (H, W), (channels, H, W) or a full batch.
    """
    if isinstance(image, np.ndarray):
        tensor = torch.from_numpy(np.ascontiguousarray(image))
        if tensor.dim() == 3:
            tensor = tensor.permute(2, 0, 1)
    else:
        tensor = image
    if tensor.dim() == 2:
        tensor = tensor.unsqueeze(0)
    if tensor.dim() == 3:
        tensor = tensor.unsqueeze(0)
    if tensor.dim() != 4:
        raise ShapeError(f"cannot interpret image of shape {tuple(image.shape)}")
    if not tensor.is_floating_point():
        tensor = tensor.float()
    check_input_shape(tensor, config)
    return tensor


def check_input_shape(batch: torch.Tensor, config: ModelConfig) -> None:
    _, channels, height, width = batch.shape
    if channels != config.input_channels:
        raise ShapeError(
            f"model expects {config.input_channels} input channel(s), got {channels}"
        )
    divisor = config.spatial_divisor
    if height % divisor or width % divisor:
        raise ShapeError(
            f"spatial size {height}x{width} is not divisible by {divisor} "
            f"(2^{config.num_encoder_blocks})"
        )


def forward(
    model: SegmentationModel,
    image: np.ndarray | torch.Tensor,
    dropout_active: bool = False,
    rng_seed: Optional[int] = None,
) -> torch.Tensor:
    """
    Inference pass with batch-norm running statistics.

    With `dropout_active` the spatial dropout masks come from a generator
    seeded with `rng_seed`, so the output is a function of (parameters, image,
    seed). Returns the (N, C, H, W) score map on the model's device.
    """
    batch = as_image_batch(image, model.config)
    device = next(model.parameters()).device
    batch = batch.to(device=device, dtype=next(model.parameters()).dtype)

    context = INACTIVE
    if dropout_active:
        context = (
            DropoutContext.seeded(rng_seed)
            if rng_seed is not None
            else DropoutContext(active=True)
        )

    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            return model(batch, context)
    finally:
        model.train(was_training)
