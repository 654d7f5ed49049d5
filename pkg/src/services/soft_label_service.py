from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import torch
from loguru import logger

from src.data.datasets import UnlabeledDataset
from src.data.soft_label_store import SUFFIX, load_record, save_record
from src.exceptions.segmentation_exceptions import DatasetError, ShapeError
from src.schemas.inference_schema import McConfig, SoftLabelRecord
from src.segmentation.bayesian import confidence_map, entropy_map, mc_mean_prediction
from src.segmentation.dense_unet import SegmentationModel


class SoftLabelService:
    @staticmethod
    def generate_soft_labels(
        teacher: SegmentationModel,
        images: torch.Tensor | Sequence[np.ndarray],
        image_ids: Sequence[str],
        mc: McConfig,
        teacher_checkpoint_id: str,
    ) -> list[SoftLabelRecord]:
        """
        One record per image: MC-averaged scores, their entropy and the
        confidence exp(-alpha * u). Images are processed one at a time, so a
        record depends only on (teacher, image, mc) and not on the batch it
        arrived in.
        """
        if len(images) != len(image_ids):
            raise ShapeError(f"{len(images)} images but {len(image_ids)} ids")
        records = []
        for image, image_id in zip(images, image_ids):
            mean_scores = mc_mean_prediction(teacher, image, mc)[0]
            uncertainty = entropy_map(mean_scores)
            records.append(
                SoftLabelRecord(
                    soft_label=mean_scores.float().cpu(),
                    uncertainty=uncertainty.float().cpu(),
                    confidence=confidence_map(uncertainty, mc.alpha).float().cpu(),
                    source_image_id=image_id,
                    teacher_checkpoint_id=teacher_checkpoint_id,
                    mc_config=mc,
                )
            )
        return records

    @staticmethod
    def mean_uncertainty(
        teacher: SegmentationModel,
        images: torch.Tensor | Sequence[np.ndarray],
        mc: McConfig,
    ) -> float:
        """Mean per-pixel entropy (nats) of the teacher over a probe set."""
        if len(images) == 0:
            raise DatasetError("the uncertainty probe needs at least one image")
        values = [
            entropy_map(mc_mean_prediction(teacher, image, mc)).mean().item()
            for image in images
        ]
        return float(np.mean(values))

    @staticmethod
    def precompute(
        teacher: SegmentationModel,
        unlabeled: UnlabeledDataset,
        mc: McConfig,
        teacher_checkpoint_id: str,
        store_dir: Optional[Path] = None,
    ) -> dict[str, SoftLabelRecord]:
        """
        Records for the whole unlabeled set, keyed by image id. Records already
        in `store_dir` from the same teacher and MC settings are reused.
        """
        cache: dict[str, SoftLabelRecord] = {}
        if store_dir is not None and Path(store_dir).is_dir():
            wanted = set(unlabeled.ids)
            cache = {
                image_id: record
                for image_id, record in SoftLabelService.load_store(store_dir).items()
                if image_id in wanted
                and record.teacher_checkpoint_id == teacher_checkpoint_id
                and record.mc_config == mc
            }
            if cache:
                logger.info(f"Reusing {len(cache)} stored soft labels from {store_dir}")
        missing = [sample for sample in unlabeled if sample.id not in cache]
        logger.info(f"Precomputing soft labels for {len(missing)} unlabeled images")
        for sample in missing:
            record = SoftLabelService.generate_soft_labels(
                teacher, [sample.image], [sample.id], mc, teacher_checkpoint_id
            )[0]
            cache[sample.id] = record
            if store_dir is not None:
                save_record(store_dir, record)
        if store_dir is not None:
            logger.info(f"Stored {len(cache)} soft-label files in {store_dir}")
        return cache

    @staticmethod
    def load_store(store_dir: Path) -> dict[str, SoftLabelRecord]:
        paths = sorted(Path(store_dir).glob(f"*{SUFFIX}"))
        records = [load_record(path) for path in paths]
        return {record.source_image_id: record for record in records}
