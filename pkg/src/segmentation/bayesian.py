"""
Dropout variational inference over a trained segmentation model.

Pass k of an MC estimate runs with dropout masks drawn from
`derive_seed(base_seed, k)`. Entropies are in nats so that alpha in
exp(-alpha * u) is on the natural-log scale.
"""

import math

import numpy as np
import torch

from src.exceptions.segmentation_exceptions import ConfigurationError
from src.schemas.inference_schema import McConfig
from src.segmentation.dense_unet import SegmentationModel, forward
from src.utils.seeding import derive_seed


def mc_mean_prediction(
    model: SegmentationModel,
    image: np.ndarray | torch.Tensor,
    mc: McConfig,
) -> torch.Tensor:
    """Average of K stochastic forward passes, (N, C, H, W)."""
    # all passes coincide without dropout; one pass keeps the result exact
    num_passes = mc.num_passes if model.config.dropout_rate > 0 else 1
    total = None
    for k in range(num_passes):
        scores = forward(
            model,
            image,
            dropout_active=True,
            rng_seed=derive_seed(mc.base_seed, k),
        )
        total = scores if total is None else total + scores
    return total / num_passes


def entropy_map(mean_scores: torch.Tensor) -> torch.Tensor:
    """
    Per-pixel Shannon entropy over the class axis (dim -3), 0 log 0 = 0.

    Accepts (C, H, W) or (N, C, H, W); values are clipped into [0, ln C].
    """
    num_classes = mean_scores.shape[-3]
    entropy = -torch.special.xlogy(mean_scores, mean_scores).sum(dim=-3)
    return entropy.clamp(min=0.0, max=math.log(num_classes))


def confidence_map(uncertainty: torch.Tensor, alpha: float) -> torch.Tensor:
    """Per-pixel soft-label reliability exp(-alpha * u), in (0, 1]."""
    if alpha < 0 or not math.isfinite(alpha):
        raise ConfigurationError(f"alpha must be a non-negative real, got {alpha}")
    return torch.exp(-alpha * uncertainty)
