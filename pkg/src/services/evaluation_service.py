from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import torch
from loguru import logger

from src.data.datasets import LabeledDataset
from src.exceptions.segmentation_exceptions import EvaluationError, ShapeError
from src.schemas.inference_schema import McConfig
from src.schemas.report_schema import DiceReport, PrCurve
from src.segmentation.bayesian import confidence_map, entropy_map, mc_mean_prediction
from src.segmentation.dense_unet import SegmentationModel, forward
from src.segmentation.metrics import (
    default_class_names,
    per_class_dice,
    precision_recall_curve,
)
from src.utils.enums import ConfidenceSource


class EvaluationService:
    @staticmethod
    def predict_scores(
        model: SegmentationModel,
        image: np.ndarray | torch.Tensor,
        mc: Optional[McConfig] = None,
    ) -> torch.Tensor:
        """(C, H, W) scores: deterministic forward, or the MC mean with `mc`."""
        if mc is None:
            return forward(model, image)[0].cpu()
        return mc_mean_prediction(model, image, mc)[0].cpu()

    @staticmethod
    def confidence_of(
        model: SegmentationModel, image: np.ndarray | torch.Tensor, mc: McConfig
    ) -> torch.Tensor:
        uncertainty = entropy_map(mc_mean_prediction(model, image, mc)[0])
        return confidence_map(uncertainty, mc.alpha).cpu()

    @staticmethod
    def _check_test_set(test_set: LabeledDataset) -> None:
        if len(test_set) == 0:
            logger.error("Evaluation called with an empty test set")
            raise EvaluationError("the test set is empty")

    @staticmethod
    def _report(
        per_image: list[np.ndarray],
        support: np.ndarray,
        class_names: Sequence[str],
        **provenance,
    ) -> DiceReport:
        dices = np.vstack(per_image)
        image_averages = dices[:, 1:].mean(axis=1)
        return DiceReport(
            class_names=list(class_names),
            per_class_dice=dices.mean(axis=0).tolist(),
            per_class_std=dices.std(axis=0).tolist(),
            per_class_support=support.astype(int).tolist(),
            mean_dice=float(image_averages.mean()),
            mean_dice_std=float(image_averages.std()),
            num_images=dices.shape[0],
            **provenance,
        )

    @staticmethod
    def evaluate_model(
        model: SegmentationModel,
        test_set: LabeledDataset,
        mc: Optional[McConfig] = None,
        class_names: Optional[Sequence[str]] = None,
        checkpoint_id: Optional[str] = None,
    ) -> DiceReport:
        """Per-image Dice of the argmax prediction, averaged over the test set."""
        EvaluationService._check_test_set(test_set)
        num_classes = model.config.num_classes
        per_image, support = [], np.zeros(num_classes, dtype=np.int64)
        for sample in test_set:
            scores = EvaluationService.predict_scores(model, sample.image, mc)
            prediction = scores.argmax(dim=0).numpy()
            per_image.append(per_class_dice(prediction, sample.label_map, num_classes))
            support += np.bincount(sample.label_map.ravel(), minlength=num_classes)
        report = EvaluationService._report(
            per_image,
            support,
            class_names or default_class_names(num_classes),
            checkpoint_id=checkpoint_id,
        )
        logger.info(
            f"Mean Dice {report.mean_dice:.4f} +- {report.mean_dice_std:.4f} over "
            f"{report.num_images} images"
        )
        return report

    @staticmethod
    def confident_subset_report(
        model: SegmentationModel,
        test_set: LabeledDataset,
        threshold: float = 0.5,
        confidence_maps: Optional[Sequence[np.ndarray | torch.Tensor]] = None,
        source: Optional[ConfidenceSource] = None,
        mc: McConfig = McConfig(),
        teacher: Optional[SegmentationModel] = None,
        class_names: Optional[Sequence[str]] = None,
        checkpoint_id: Optional[str] = None,
    ) -> DiceReport:
        """
        Dice restricted to pixels with confidence above `threshold`.

        The confidence maps are taken from `confidence_maps` when given;
        otherwise they are computed by MC dropout on the evaluated model
        (source=student, the default) or on `teacher` (source=teacher).
        Given maps are recorded as source=provided unless `source` says whose
        they are.
        """
        EvaluationService._check_test_set(test_set)
        if confidence_maps is not None and len(confidence_maps) != len(test_set):
            raise EvaluationError(
                f"{len(confidence_maps)} confidence maps for "
                f"{len(test_set)} test images"
            )
        if confidence_maps is not None:
            source = source or ConfidenceSource.PROVIDED
        elif source == ConfidenceSource.PROVIDED:
            raise EvaluationError("source=provided needs confidence maps")
        else:
            source = source or ConfidenceSource.STUDENT
            if source == ConfidenceSource.TEACHER and teacher is None:
                raise EvaluationError("teacher-side confidence needs a teacher model")
        confidence_model = teacher if source == ConfidenceSource.TEACHER else model

        num_classes = model.config.num_classes
        per_image, support = [], np.zeros(num_classes, dtype=np.int64)
        kept, total = 0, 0
        for index, sample in enumerate(test_set):
            if confidence_maps is not None:
                omega = np.asarray(confidence_maps[index])
            else:
                omega = EvaluationService.confidence_of(
                    confidence_model, sample.image, mc
                ).numpy()
            if omega.shape != sample.label_map.shape:
                raise ShapeError(
                    f"confidence map {omega.shape} does not match test image "
                    f"{sample.label_map.shape}"
                )
            mask = omega > threshold
            prediction = forward(model, sample.image)[0].argmax(dim=0).cpu().numpy()
            per_image.append(
                per_class_dice(prediction, sample.label_map, num_classes, mask)
            )
            support += np.bincount(sample.label_map[mask], minlength=num_classes)
            kept += int(mask.sum())
            total += mask.size

        fraction = kept / total
        if kept == 0:
            logger.warning(
                f"No pixel has confidence above {threshold}; the confident-subset "
                "report is degenerate"
            )
        report = EvaluationService._report(
            per_image,
            support,
            class_names or default_class_names(num_classes),
            checkpoint_id=checkpoint_id,
            confidence_source=source,
            confidence_threshold=threshold,
            confident_fraction=fraction,
            degenerate=kept == 0,
        )
        logger.info(
            f"Confident-subset mean Dice {report.mean_dice:.4f} on "
            f"{100 * fraction:.1f}% of the pixels (omega > {threshold})"
        )
        return report

    @staticmethod
    def precision_recall(
        model: SegmentationModel,
        test_set: LabeledDataset,
        class_id: int = 1,
        num_thresholds: int = 101,
        mc: Optional[McConfig] = None,
    ) -> PrCurve:
        """Pooled PR curve of one class's scores over every test pixel."""
        EvaluationService._check_test_set(test_set)
        scores, truth = [], []
        for sample in test_set:
            class_scores = EvaluationService.predict_scores(model, sample.image, mc)
            scores.append(class_scores[class_id].numpy().ravel())
            truth.append((sample.label_map == class_id).ravel())
        return precision_recall_curve(
            np.concatenate(scores).clip(0.0, 1.0),
            np.concatenate(truth),
            num_thresholds,
            class_id=class_id,
        )

    @staticmethod
    def write_report(report: DiceReport, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        report.to_frame().to_csv(path, index=False)
        logger.info(f"Wrote Dice report {path}")
        return path

    @staticmethod
    def write_pr_curve(curve: PrCurve, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        curve.to_frame().to_csv(path, index=False)
        return path
