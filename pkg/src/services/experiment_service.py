from pathlib import Path
from typing import NamedTuple, Optional, Sequence

import numpy as np
import pandas as pd
from loguru import logger

from src.data.datasets import LabeledDataset, UnlabeledDataset, split_validation
from src.data.io import load_labeled_split, load_unlabeled_split, write_dataset
from src.data.synthetic import generate_synthetic_dataset
from src.exceptions.segmentation_exceptions import ConfigurationError
from src.schemas.run_schema import RunConfig
from src.segmentation.dense_unet import SegmentationModel
from src.segmentation.student_methods import method_options
from src.services.checkpoint_service import CheckpointService
from src.services.evaluation_service import EvaluationService
from src.services.training_service import TrainingService
from src.utils.enums import DatasetSplit, ModelRole, StudentMethod

ALPHA_SWEEP_FILENAME = "alpha_sweep.csv"
COMPARISON_FILENAME = "comparison.csv"
COMPARISON_SUMMARY_FILENAME = "comparison_summary.csv"


class ExperimentData(NamedTuple):
    train: LabeledDataset
    validation: LabeledDataset
    unlabeled: UnlabeledDataset
    test: LabeledDataset


class ExperimentService:
    @staticmethod
    def synthesize(config: RunConfig) -> ExperimentData:
        """
        Synthetic corpus sized by `config.dataset`; the validation images are
        held out of n_labeled + n_validation generated labeled images.
        """
        sizes = config.dataset
        labeled, unlabeled, test = generate_synthetic_dataset(
            config.synth,
            sizes.n_labeled + sizes.n_validation,
            sizes.n_unlabeled,
            sizes.n_test,
        )
        train, validation = split_validation(
            labeled, sizes.n_validation, config.synth.seed
        )
        return ExperimentData(train, validation, unlabeled, test)

    @staticmethod
    def write(
        directory: Path,
        data: ExperimentData,
        config: RunConfig,
        with_boundaries: bool = False,
    ) -> Path:
        return write_dataset(
            directory,
            {
                DatasetSplit.TRAIN: data.train,
                DatasetSplit.VALIDATION: data.validation,
                DatasetSplit.TEST: data.test,
                DatasetSplit.UNLABELED: data.unlabeled,
            },
            config.model.num_classes,
            generator=config.synth,
            with_boundaries=with_boundaries,
        )

    @staticmethod
    def load(directory: Path, num_classes: int) -> ExperimentData:
        data = ExperimentData(
            train=load_labeled_split(directory, DatasetSplit.TRAIN),
            validation=load_labeled_split(directory, DatasetSplit.VALIDATION),
            unlabeled=load_unlabeled_split(directory),
            test=load_labeled_split(directory, DatasetSplit.TEST),
        )
        if data.train.num_classes != num_classes:
            logger.error(
                f"Dataset {directory} has {data.train.num_classes} classes, the "
                f"model {num_classes}"
            )
            raise ConfigurationError(
                f"dataset {directory} has {data.train.num_classes} classes but "
                f"model.num_classes is {num_classes}"
            )
        return data

    @staticmethod
    def train_teacher(
        config: RunConfig,
        data: ExperimentData,
        out_dir: Optional[Path] = None,
        resume: bool = False,
    ) -> tuple[SegmentationModel, str]:
        teacher = TrainingService.train_teacher(
            data.train,
            data.validation,
            config.model,
            config.teacher_schedule,
            config.augmentation,
            config.loss,
            out_dir=out_dir,
            resume=resume,
        )
        return teacher, f"{ModelRole.TEACHER}-{CheckpointService.fingerprint(teacher)}"

    @staticmethod
    def train_method(
        method: StudentMethod,
        config: RunConfig,
        teacher: SegmentationModel,
        data: ExperimentData,
        out_dir: Optional[Path] = None,
        resume: bool = False,
        teacher_checkpoint_id: Optional[str] = None,
    ) -> SegmentationModel:
        setup = method_options[method](config)
        unlabeled = data.unlabeled if setup.uses_unlabeled else UnlabeledDataset([])
        logger.info(f"Training student with method {method}")
        return TrainingService.train_student(
            teacher,
            data.train,
            unlabeled,
            data.validation,
            config.model,
            config.train,
            setup.mc,
            setup.loss,
            config.augmentation,
            out_dir=out_dir,
            resume=resume,
            teacher_checkpoint_id=teacher_checkpoint_id,
        )

    @staticmethod
    def best_alpha(sweep: pd.DataFrame) -> float:
        """Highest validation Dice; ties go to the smallest alpha."""
        ranked = sweep.sort_values(
            ["validation_mean_dice", "alpha"], ascending=[False, True], kind="stable"
        )
        return float(ranked.iloc[0]["alpha"])

    @staticmethod
    def sweep_alpha(
        config: RunConfig,
        teacher: SegmentationModel,
        data: ExperimentData,
        alphas: Optional[Sequence[float]] = None,
        out_dir: Optional[Path] = None,
        teacher_checkpoint_id: Optional[str] = None,
    ) -> tuple[pd.DataFrame, float]:
        """One U-SLS student per alpha, scored by mean Dice on the validation split."""
        alphas = list(config.alpha_sweep if alphas is None else alphas)
        if not alphas:
            raise ConfigurationError("the alpha sweep needs at least one value")
        rows = []
        for alpha in alphas:
            alpha_config = config.with_overrides(
                {"mc.alpha": alpha, "loss.alpha": alpha}
            )
            student = ExperimentService.train_method(
                StudentMethod.U_SLS,
                alpha_config,
                teacher,
                data,
                out_dir=None if out_dir is None else Path(out_dir) / f"alpha_{alpha:g}",
                teacher_checkpoint_id=teacher_checkpoint_id,
            )
            report = EvaluationService.evaluate_model(student, data.validation)
            rows.append(
                {
                    "alpha": float(alpha),
                    "seed": config.train.seed,
                    "validation_mean_dice": report.mean_dice,
                    "validation_mean_dice_std": report.mean_dice_std,
                    "validation_loss": TrainingService.validation_loss(
                        student, data.validation
                    ),
                }
            )
            logger.info(f"alpha={alpha:g}: validation mean Dice {report.mean_dice:.4f}")
        sweep = pd.DataFrame(rows)
        best = ExperimentService.best_alpha(sweep)
        logger.info(f"Best alpha {best:g}")
        return sweep, best

    @staticmethod
    def _result_row(
        method: str, seed: int, model: SegmentationModel, config: RunConfig, test
    ) -> dict:
        report = EvaluationService.evaluate_model(model, test)
        row = {
            "method": method,
            "seed": seed,
            "mean_dice": report.mean_dice,
            "mean_dice_std": report.mean_dice_std,
        }
        row.update(
            {
                f"dice_{name}": value
                for name, value in zip(report.class_names, report.per_class_dice)
            }
        )
        row["confident_mean_dice"] = np.nan
        row["confident_fraction"] = np.nan
        if method == StudentMethod.U_SLS:
            confident = EvaluationService.confident_subset_report(
                model, test, mc=config.mc
            )
            row["confident_mean_dice"] = confident.mean_dice
            row["confident_fraction"] = confident.confident_fraction
        return row

    @staticmethod
    def compare_methods(
        config: RunConfig,
        seeds: Optional[Sequence[int]] = None,
        data: Optional[ExperimentData] = None,
        out_dir: Optional[Path] = None,
        methods: Sequence[StudentMethod] = tuple(StudentMethod),
    ) -> tuple[pd.DataFrame, pd.DataFrame]:
        """
        Per seed: one teacher and one student per method, all scored on the
        test split. Without `data` a synthetic corpus is generated per seed.
        Returns the per-run table and its mean over seeds.
        """
        seeds = list(config.comparison_seeds if seeds is None else seeds)
        if not seeds:
            raise ConfigurationError("the comparison needs at least one seed")
        rows = []
        for seed in seeds:
            seed_config = config.with_seed(seed)
            seed_data = data or ExperimentService.synthesize(seed_config)
            seed_dir = None if out_dir is None else Path(out_dir) / f"seed_{seed}"
            logger.info(f"Comparison run for seed {seed}")
            teacher, teacher_id = ExperimentService.train_teacher(
                seed_config, seed_data, seed_dir
            )
            rows.append(
                ExperimentService._result_row(
                    str(ModelRole.TEACHER), seed, teacher, seed_config, seed_data.test
                )
            )
            for method in methods:
                student = ExperimentService.train_method(
                    method,
                    seed_config,
                    teacher,
                    seed_data,
                    out_dir=None if seed_dir is None else seed_dir / str(method),
                    teacher_checkpoint_id=teacher_id,
                )
                rows.append(
                    ExperimentService._result_row(
                        str(method), seed, student, seed_config, seed_data.test
                    )
                )
        results = pd.DataFrame(rows)
        summary = (
            results.drop(columns="seed")
            .groupby("method", sort=False)
            .mean(numeric_only=True)
            .reset_index()
        )
        summary["mean_dice_seed_std"] = (
            results.groupby("method", sort=False)["mean_dice"].std(ddof=0).to_numpy()
        )
        summary["num_seeds"] = len(seeds)
        return results, summary
