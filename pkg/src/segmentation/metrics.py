from typing import Optional

import numpy as np

from src.exceptions.segmentation_exceptions import EvaluationError, ShapeError
from src.schemas.report_schema import PrCurve


def dice(
    pred: np.ndarray,
    gt: np.ndarray,
    class_id: int,
    mask: Optional[np.ndarray] = None,
) -> float:
    """
    2|A n B| / (|A| + |B|) for the pixels of `class_id`, optionally counting
    only pixels where `mask` is true. Both sets empty -> 1.0.
    """
    if pred.shape != gt.shape:
        raise ShapeError(f"prediction {pred.shape} and ground truth {gt.shape} differ")
    a = pred == class_id
    b = gt == class_id
    if mask is not None:
        if mask.shape != gt.shape:
            raise ShapeError(f"mask {mask.shape} does not match labels {gt.shape}")
        a = a & mask
        b = b & mask
    total = int(a.sum()) + int(b.sum())
    if total == 0:
        return 1.0
    return 2.0 * int((a & b).sum()) / total


def per_class_dice(
    pred: np.ndarray,
    gt: np.ndarray,
    num_classes: int,
    mask: Optional[np.ndarray] = None,
) -> np.ndarray:
    return np.array(
        [dice(pred, gt, class_id, mask) for class_id in range(num_classes)],
        dtype=np.float64,
    )


def precision_recall_curve(
    class_scores: np.ndarray,
    gt: np.ndarray,
    num_thresholds: int = 101,
    class_id: int = 1,
) -> PrCurve:
    """
    Precision and recall of `score >= threshold` for thresholds evenly spaced
    from 1 down to 0. Precision with no predicted positives is 1.
    """
    scores = np.asarray(class_scores, dtype=np.float64).ravel()
    truth = np.asarray(gt).astype(bool).ravel()
    if scores.shape != truth.shape:
        raise ShapeError(
            f"scores ({scores.size} px) and ground truth ({truth.size} px) differ"
        )
    if num_thresholds < 2:
        raise EvaluationError("at least two thresholds are needed for a curve")
    if scores.size and (scores.min() < 0.0 or scores.max() > 1.0):
        raise EvaluationError("class scores must lie in [0, 1]")
    positives = int(truth.sum())
    if positives == 0:
        raise EvaluationError(
            "ground truth has no positive pixels for this class; recall is undefined"
        )

    thresholds = np.linspace(1.0, 0.0, num_thresholds)
    all_sorted = np.sort(scores)
    positive_sorted = np.sort(scores[truth])
    predicted = all_sorted.size - np.searchsorted(all_sorted, thresholds, "left")
    true_positive = positive_sorted.size - np.searchsorted(
        positive_sorted, thresholds, "left"
    )
    precision = np.divide(
        true_positive,
        predicted,
        out=np.ones_like(thresholds),
        where=predicted > 0,
    )
    recall = true_positive / positives
    return PrCurve(
        class_id=class_id,
        thresholds=thresholds.tolist(),
        precision=precision.tolist(),
        recall=recall.tolist(),
    )


RETINAL_LAYER_NAMES = [
    "background",
    "RNFL",
    "GCL+IPL",
    "INL",
    "OPL",
    "ONL",
    "IS",
    "OS",
    "RPE",
]


def default_class_names(num_classes: int) -> list[str]:
    if num_classes == len(RETINAL_LAYER_NAMES):
        return list(RETINAL_LAYER_NAMES)
    return ["background"] + [f"layer_{k}" for k in range(1, num_classes)]
