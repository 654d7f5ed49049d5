"""
Paired mirror/rotation augmentation for labeled images.

The image is interpolated bilinearly, the label map by nearest neighbour.
Pixels rotated in from outside the frame get intensity 0.0 and class 0
(background).
"""

import numpy as np
import torch
from torchvision.transforms import InterpolationMode
from torchvision.transforms import functional as TF

from src.schemas.training_schema import AugmentationConfig

IMAGE_FILL = 0.0
LABEL_FILL = 0


def augment(
    image: np.ndarray,
    label_map: np.ndarray,
    cfg: AugmentationConfig,
    seed: int,
) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    mirror = bool(rng.random() < cfg.mirror_probability)
    low, high = cfg.rotation_range_degrees
    angle = float(rng.uniform(low, high)) if high > low else float(low)

    image_t = torch.from_numpy(np.ascontiguousarray(image, np.float32))[None]
    label_t = torch.from_numpy(label_map.astype(np.float32))[None]
    if mirror:
        image_t = TF.hflip(image_t)
        label_t = TF.hflip(label_t)
    if angle != 0.0:
        image_t = TF.rotate(
            image_t, angle, InterpolationMode.BILINEAR, fill=[IMAGE_FILL]
        ).clamp(0.0, 1.0)
        label_t = TF.rotate(
            label_t, angle, InterpolationMode.NEAREST, fill=[float(LABEL_FILL)]
        )
    return (
        image_t[0].numpy(),
        label_t[0].round().numpy().astype(label_map.dtype),
    )
