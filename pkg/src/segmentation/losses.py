"""
Training objectives.

Score maps are softmax outputs of shape (N, C, H, W). Probabilities are
clamped to [LOG_CLAMP_MIN, 1] before every logarithm.
"""

import math
from typing import Iterable, Optional, Sequence

import numpy as np
import torch
import torch.nn.functional as F
from loguru import logger

from src.exceptions.segmentation_exceptions import (
    ConfigurationError,
    DivergenceError,
    LabelError,
    ShapeError,
)
from src.schemas.inference_schema import SoftLabelRecord
from src.schemas.loss_schema import LossConfig

LOG_CLAMP_MIN = 1e-7


def clamped_log(scores: torch.Tensor) -> torch.Tensor:
    return torch.log(scores.clamp(min=LOG_CLAMP_MIN, max=1.0))


def one_hot_labels(label_map: torch.Tensor, num_classes: int) -> torch.Tensor:
    """(N, H, W) integer classes -> (N, C, H, W) float one-hot."""
    if label_map.min() < 0 or label_map.max() >= num_classes:
        raise LabelError(f"label values must lie in [0, {num_classes - 1}]")
    return F.one_hot(label_map.long(), num_classes).permute(0, 3, 1, 2).float()


def _check_one_hot(labels: torch.Tensor) -> None:
    binary = ((labels == 0) | (labels == 1)).all()
    single = (labels.sum(dim=1) == 1).all()
    if not (binary and single):
        raise LabelError("labels must be one-hot along the class axis")


def _class_weight_tensor(
    class_weights: Optional[Sequence[float] | torch.Tensor],
    num_classes: int,
    like: torch.Tensor,
) -> torch.Tensor:
    if class_weights is None:
        return torch.ones(num_classes, dtype=like.dtype, device=like.device)
    weights = torch.as_tensor(class_weights, dtype=like.dtype, device=like.device)
    if weights.shape != (num_classes,):
        raise ShapeError(
            f"expected {num_classes} class weights, got {tuple(weights.shape)}"
        )
    return weights


def labeled_loss(
    student_scores: torch.Tensor,
    labels: torch.Tensor,
    class_weights: Optional[Sequence[float] | torch.Tensor] = None,
) -> torch.Tensor:
    """Class-weighted categorical cross entropy, mean over pixels and batch."""
    if student_scores.shape != labels.shape:
        raise ShapeError(
            f"scores {tuple(student_scores.shape)} and labels "
            f"{tuple(labels.shape)} differ"
        )
    _check_one_hot(labels)
    weights = _class_weight_tensor(class_weights, labels.shape[1], student_scores)
    weighted = weights.view(1, -1, 1, 1) * labels.to(student_scores.dtype)
    return -(weighted * clamped_log(student_scores)).sum(dim=1).mean()


def class_region_partition(soft_label: torch.Tensor) -> torch.Tensor:
    """Per-pixel argmax over the class axis; ties go to the lowest index."""
    return torch.argmax(soft_label, dim=-3)


def class_region_mass(
    assignment: torch.Tensor, confidence: torch.Tensor, num_classes: int
) -> torch.Tensor:
    """Sum of confidence per class region: (N, H, W) -> (N, C)."""
    regions = F.one_hot(assignment, num_classes).to(confidence.dtype)
    return (regions * confidence.unsqueeze(-1)).sum(dim=(-3, -2))


def zeta_weights(mass: torch.Tensor, min_class_mass: float) -> torch.Tensor:
    """1 / mass for classes whose mass exceeds P (strictly), otherwise 0."""
    tiny = torch.finfo(mass.dtype).tiny
    return torch.where(
        mass > min_class_mass,
        1.0 / mass.clamp(min=tiny),
        torch.zeros_like(mass),
    )


def confidence_weighted_loss(
    student_scores: torch.Tensor,
    soft_labels: torch.Tensor,
    confidence: torch.Tensor,
    min_class_mass: float,
) -> torch.Tensor:
    """
    Sum over images of  -sum_c zeta_c sum_{t in Z_c} w_t log s_c^t.

    Regions Z_c and weights come from the teacher (`soft_labels`,
    `confidence`); the log term uses the student's scores.
    """
    if student_scores.shape != soft_labels.shape:
        raise ShapeError(
            f"student scores {tuple(student_scores.shape)} and soft labels "
            f"{tuple(soft_labels.shape)} differ"
        )
    if confidence.shape != soft_labels.shape[:1] + soft_labels.shape[2:]:
        raise ShapeError(
            f"confidence {tuple(confidence.shape)} does not match soft labels "
            f"{tuple(soft_labels.shape)}"
        )
    num_classes = soft_labels.shape[1]
    confidence = confidence.detach().to(student_scores.dtype)
    assignment = class_region_partition(soft_labels.detach())
    zeta = zeta_weights(
        class_region_mass(assignment, confidence, num_classes), min_class_mass
    )
    regions = F.one_hot(assignment, num_classes).permute(0, 3, 1, 2)
    pixel_weights = (
        zeta.view(*zeta.shape, 1, 1)
        * regions.to(student_scores.dtype)
        * confidence.unsqueeze(1)
    )
    return -(pixel_weights * clamped_log(student_scores)).sum()


def unlabeled_loss(
    student_scores: torch.Tensor,
    records: SoftLabelRecord | Sequence[SoftLabelRecord],
    config: LossConfig,
) -> torch.Tensor:
    if isinstance(records, SoftLabelRecord):
        records = [records]
    if len(records) != student_scores.shape[0]:
        raise ShapeError(
            f"{len(records)} soft-label records for a batch of "
            f"{student_scores.shape[0]} images"
        )
    mismatched = sorted({r.mc_config.alpha for r in records} - {config.alpha})
    if mismatched:
        raise ConfigurationError(
            f"soft labels were weighted with alpha={mismatched}, the loss "
            f"expects alpha={config.alpha}"
        )
    device, dtype = student_scores.device, student_scores.dtype
    soft_labels = torch.stack([r.soft_label for r in records]).to(device, dtype)
    confidence = torch.stack([r.confidence for r in records]).to(device, dtype)
    return confidence_weighted_loss(
        student_scores, soft_labels, confidence, config.min_class_mass
    )


def semi_supervised_loss(
    labeled_term: torch.Tensor | float,
    unlabeled_term: torch.Tensor | float,
    unlabeled_weight: float = 1.0,
    iteration: Optional[int] = None,
) -> torch.Tensor | float:
    """L_lab + unlabeled_weight * L_unlab; the default weight is a plain sum."""
    for name, term in (("labeled", labeled_term), ("unlabeled", unlabeled_term)):
        if not math.isfinite(float(term)):
            logger.error(f"Non-finite {name} loss: {float(term)}")
            raise DivergenceError(f"{name} loss is not finite", iteration)
    if unlabeled_weight == 1.0:
        return labeled_term + unlabeled_term
    return labeled_term + unlabeled_weight * unlabeled_term


def inverse_frequency_weights(
    label_maps: Iterable[np.ndarray], num_classes: int
) -> list[float]:
    """
    Inverse class frequency over the labeled set, normalized to mean 1 across
    the classes that occur. Classes that never occur get weight 0.
    """
    counts = np.zeros(num_classes, dtype=np.float64)
    for label_map in label_maps:
        counts += np.bincount(label_map.ravel(), minlength=num_classes)[:num_classes]
    present = counts > 0
    if not present.any():
        raise LabelError("cannot compute class weights from an empty label set")
    if not present.all():
        logger.warning(
            f"Classes {np.flatnonzero(~present).tolist()} never occur in the "
            "labeled set; their weight is 0"
        )
    weights = np.zeros(num_classes, dtype=np.float64)
    weights[present] = counts[present].sum() / counts[present]
    weights[present] /= weights[present].mean()
    return weights.tolist()
