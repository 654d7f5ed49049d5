import math
import time
from collections import Counter
from pathlib import Path
from typing import Callable, NamedTuple, Optional

import numpy as np
import pandas as pd
import torch
from loguru import logger
from torch.optim.lr_scheduler import MultiStepLR
from tqdm import tqdm

from src.configs.env import Config
from src.data.datasets import LabeledDataset, MinibatchSampler, UnlabeledDataset
from src.exceptions.segmentation_exceptions import DatasetError, DivergenceError
from src.schemas.inference_schema import McConfig, SoftLabelRecord
from src.schemas.loss_schema import LossConfig
from src.schemas.model_schema import ModelConfig
from src.schemas.training_schema import (
    AugmentationConfig,
    MetricsRow,
    TrainConfig,
    TrainState,
)
from src.segmentation.dense_unet import (
    SegmentationModel,
    build_model,
    check_input_shape,
    forward,
)
from src.segmentation.losses import (
    inverse_frequency_weights,
    labeled_loss,
    one_hot_labels,
    semi_supervised_loss,
    unlabeled_loss,
)
from src.segmentation.spatial_dropout import DropoutContext
from src.services.checkpoint_service import (
    BEST_CHECKPOINT,
    LAST_CHECKPOINT,
    CheckpointService,
)
from src.services.soft_label_service import SoftLabelService
from src.utils.enums import ModelRole
from src.utils.seeding import derive_seed

METRICS_FILENAME = "metrics.csv"
SOFT_LABEL_DIRNAME = "soft_labels"

# independent random streams derived from TrainConfig.seed
LABELED_SAMPLER_STREAM = 0
UNLABELED_SAMPLER_STREAM = 1
AUGMENTATION_STREAM = 2
LABELED_DROPOUT_STREAM = 3
UNLABELED_DROPOUT_STREAM = 4


class StepLosses(NamedTuple):
    total: torch.Tensor
    labeled: float
    unlabeled: float
    unlabeled_batches: int


class _TrainingLoop:
    """
    Optimizer, schedule, validation, early stopping and checkpointing shared
    by teacher and student training. The per-iteration objective is supplied
    as a callable of the iteration index.
    """

    def __init__(
        self,
        model: SegmentationModel,
        role: ModelRole,
        train_cfg: TrainConfig,
        validation: LabeledDataset,
        out_dir: Optional[Path] = None,
        resume: bool = False,
    ):
        self.device = torch.device(Config.DEVICE)
        self.model = model.to(self.device)
        self.role = role
        self.cfg = train_cfg
        self.validation = validation
        self.directory = None if out_dir is None else Path(out_dir) / str(role)
        self.optimizer = torch.optim.Adam(
            model.parameters(),
            lr=train_cfg.initial_learning_rate,
            betas=train_cfg.adam_betas,
            eps=train_cfg.adam_eps,
        )
        self.scheduler = MultiStepLR(
            self.optimizer,
            milestones=[train_cfg.lr_decay_at_iteration],
            gamma=train_cfg.lr_decay_factor,
        )
        self.state = TrainState(learning_rate=train_cfg.initial_learning_rate)
        self.best_parameters: Optional[dict[str, torch.Tensor]] = None
        if resume:
            self._restore()

    def _restore(self) -> None:
        if self.directory is None:
            raise DatasetError("resuming needs an output directory")
        last_path = self.directory / LAST_CHECKPOINT
        if not last_path.is_file():
            logger.warning(f"No checkpoint at {last_path}; starting from scratch")
            return
        model, payload = CheckpointService.load(last_path, self.model.config)
        self.model.load_state_dict(model.state_dict())
        self.optimizer.load_state_dict(payload["optimizer"])
        scheduler_state = dict(payload["scheduler"])
        scheduler_state["milestones"] = Counter(scheduler_state["milestones"])
        self.scheduler.load_state_dict(scheduler_state)
        self.state = TrainState.model_validate(payload["train_state"])
        best_path = self.directory / BEST_CHECKPOINT
        if best_path.is_file():
            best, _ = CheckpointService.load(best_path, self.model.config)
            self.best_parameters = {
                name: tensor.detach().clone()
                for name, tensor in best.state_dict().items()
            }
        logger.info(
            f"Resumed {self.role} training at iteration {self.state.iteration}"
        )

    def _training_payload(self) -> dict:
        scheduler_state = self.scheduler.state_dict()
        scheduler_state["milestones"] = dict(scheduler_state["milestones"])
        return {
            "optimizer": self.optimizer.state_dict(),
            "scheduler": scheduler_state,
            "train_state": self.state.model_dump(),
        }

    def _write_metrics(self) -> None:
        if self.directory is None:
            return
        self.directory.mkdir(parents=True, exist_ok=True)
        pd.DataFrame(
            [row.model_dump() for row in self.state.history],
            columns=list(MetricsRow.model_fields),
        ).to_csv(self.directory / METRICS_FILENAME, index=False)

    def _validate(
        self, lr: float, sums: dict[str, float], count: int, elapsed: float
    ) -> None:
        state, cfg = self.state, self.cfg
        loss = TrainingService.validation_loss(self.model, self.validation)
        if not math.isfinite(loss):
            logger.error(f"Validation loss of {self.role} is {loss}")
            raise DivergenceError("validation loss is not finite", state.iteration)
        state.history.append(
            MetricsRow(
                iteration=state.iteration,
                lr=lr,
                labeled_loss=sums["labeled"] / count,
                unlabeled_loss=sums["unlabeled"] / count,
                total_loss=sums["total"] / count,
                validation_loss=loss,
                wall_clock=elapsed,
            )
        )
        if loss < state.best_validation_loss - cfg.min_improvement:
            state.best_validation_loss = loss
            state.best_iteration = state.iteration
            state.stale_checks = 0
            self.best_parameters = {
                name: tensor.detach().clone()
                for name, tensor in self.model.state_dict().items()
            }
            if self.directory is not None:
                CheckpointService.save(
                    self.directory / BEST_CHECKPOINT, self.model, self.role
                )
        else:
            state.stale_checks += 1
        logger.info(
            f"{self.role} iteration {state.iteration}: validation loss {loss:.6f} "
            f"(best {state.best_validation_loss:.6f} at {state.best_iteration})"
        )
        patience = cfg.early_stop_patience
        if patience and state.stale_checks >= patience:
            state.stopped_early = True
            logger.warning(
                f"{self.role} validation loss has not improved for "
                f"{state.stale_checks} checks; stopping at iteration {state.iteration}"
            )
        if self.directory is not None:
            CheckpointService.save(
                self.directory / LAST_CHECKPOINT,
                self.model,
                self.role,
                extra=self._training_payload(),
            )
        self._write_metrics()

    def run(self, step: Callable[[int], StepLosses]) -> SegmentationModel:
        cfg, state = self.cfg, self.state
        elapsed_before = state.history[-1].wall_clock if state.history else 0.0
        start_time = time.time()
        sums = {"labeled": 0.0, "unlabeled": 0.0, "total": 0.0}
        count = 0
        iterations = range(state.iteration, cfg.max_iterations)
        if state.stopped_early:
            iterations = range(0)
        for iteration in tqdm(
            iterations,
            initial=state.iteration,
            total=cfg.max_iterations,
            desc=f"{self.role}",
            disable=Config.TESTING,
        ):
            self.model.train()
            self.optimizer.zero_grad(set_to_none=True)
            losses = step(iteration)
            losses.total.backward()
            self.optimizer.step()
            lr = self.optimizer.param_groups[0]["lr"]
            self.scheduler.step()

            state.iteration = iteration + 1
            state.learning_rate = self.optimizer.param_groups[0]["lr"]
            state.updates += 1
            state.labeled_batches += 1
            state.unlabeled_batches += losses.unlabeled_batches
            sums["labeled"] += losses.labeled
            sums["unlabeled"] += losses.unlabeled
            sums["total"] += float(losses.total.detach())
            count += 1
            logger.debug(
                f"{self.role} iteration {iteration}: lr={lr:.3g} "
                f"L_lab={losses.labeled:.6f} L_unlab={losses.unlabeled:.6f}"
            )

            if (
                state.iteration % cfg.validation_interval == 0
                or state.iteration == cfg.max_iterations
            ):
                elapsed = elapsed_before + time.time() - start_time
                self._validate(lr, sums, count, elapsed)
                sums = dict.fromkeys(sums, 0.0)
                count = 0
                if state.stopped_early:
                    break

        if self.best_parameters is not None:
            self.model.load_state_dict(self.best_parameters)
        self.model.eval()
        return self.model


def _check_image_sizes(
    datasets: list[LabeledDataset | UnlabeledDataset], model_cfg: ModelConfig
) -> None:
    for dataset in datasets:
        for shape in {sample.image.shape for sample in dataset}:
            probe = torch.zeros((1, model_cfg.input_channels, *shape))
            check_input_shape(probe, model_cfg)


class TrainingService:
    @staticmethod
    def validation_loss(
        model: SegmentationModel,
        validation_set: LabeledDataset,
        class_weights: Optional[list[float]] = None,
    ) -> float:
        """Mean labeled loss over the validation images, dropout off."""
        if len(validation_set) == 0:
            raise DatasetError("the validation set is empty")
        num_classes = model.config.num_classes
        losses = []
        for sample in validation_set:
            scores = forward(model, sample.image)
            labels = torch.from_numpy(sample.label_map.astype(np.int64))[None]
            onehot = one_hot_labels(labels, num_classes).to(scores)
            losses.append(labeled_loss(scores, onehot, class_weights).item())
        return float(np.mean(losses))

    @staticmethod
    def _labeled_term(
        model: SegmentationModel,
        labeled: LabeledDataset,
        sampler: MinibatchSampler,
        train_cfg: TrainConfig,
        augmentation: AugmentationConfig,
        class_weights: Optional[list[float]],
        iteration: int,
    ) -> torch.Tensor:
        device = next(model.parameters()).device
        images, labels, _ = labeled.collate(
            sampler.batch_indices(iteration),
            augmentation,
            seed=derive_seed(train_cfg.seed, AUGMENTATION_STREAM, iteration),
        )
        context = DropoutContext.seeded(
            derive_seed(train_cfg.seed, LABELED_DROPOUT_STREAM, iteration)
        )
        scores = model(images.to(device), context)
        onehot = one_hot_labels(labels.to(device), model.config.num_classes)
        return labeled_loss(scores, onehot.to(scores.dtype), class_weights)

    @staticmethod
    def train_teacher(
        labeled: LabeledDataset,
        validation: LabeledDataset,
        model_cfg: ModelConfig,
        train_cfg: TrainConfig,
        augmentation: AugmentationConfig = AugmentationConfig(),
        loss_cfg: LossConfig = LossConfig(),
        out_dir: Optional[Path] = None,
        resume: bool = False,
    ) -> SegmentationModel:
        """Supervised training of F_T on D_l; returns the best-validation model."""
        if len(labeled) == 0:
            logger.error("Teacher training called with an empty labeled set")
            raise DatasetError("the labeled set is empty")
        if len(validation) == 0:
            raise DatasetError("teacher training needs a validation split")
        _check_image_sizes([labeled, validation], model_cfg)
        class_weights = loss_cfg.teacher_class_weights or inverse_frequency_weights(
            labeled.label_maps(), model_cfg.num_classes
        )
        logger.info(
            f"Training teacher on {len(labeled)} labeled images for up to "
            f"{train_cfg.max_iterations} iterations; class weights {class_weights}"
        )
        model = build_model(model_cfg, seed=train_cfg.seed)
        sampler = MinibatchSampler(
            len(labeled),
            train_cfg.labeled_batch,
            derive_seed(train_cfg.seed, LABELED_SAMPLER_STREAM),
        )
        loop = _TrainingLoop(
            model, ModelRole.TEACHER, train_cfg, validation, out_dir, resume
        )

        def step(iteration: int) -> StepLosses:
            term = TrainingService._labeled_term(
                loop.model,
                labeled,
                sampler,
                train_cfg,
                augmentation,
                class_weights,
                iteration,
            )
            total = semi_supervised_loss(term, 0.0, iteration=iteration)
            return StepLosses(total, term.item(), 0.0, 0)

        return loop.run(step)

    @staticmethod
    def train_student(
        teacher: SegmentationModel,
        labeled: LabeledDataset,
        unlabeled: UnlabeledDataset,
        validation: LabeledDataset,
        model_cfg: ModelConfig,
        train_cfg: TrainConfig,
        mc: McConfig = McConfig(),
        loss_cfg: LossConfig = LossConfig(),
        augmentation: AugmentationConfig = AugmentationConfig(),
        out_dir: Optional[Path] = None,
        resume: bool = False,
        teacher_checkpoint_id: Optional[str] = None,
    ) -> SegmentationModel:
        """
        Every iteration draws one labeled and one unlabeled minibatch, builds
        soft labels for the unlabeled one with the frozen teacher and takes
        a single Adam step on L_lab + L_unlab. An empty unlabeled set leaves
        L_unlab at 0.
        """
        if len(labeled) == 0:
            logger.error("Student training called with an empty labeled set")
            raise DatasetError("the labeled set is empty")
        if len(validation) == 0:
            raise DatasetError("student training needs a validation split")
        _check_image_sizes([labeled, validation, unlabeled], model_cfg)
        if teacher.config.num_classes != model_cfg.num_classes:
            raise DatasetError(
                f"teacher predicts {teacher.config.num_classes} classes, the "
                f"student {model_cfg.num_classes}"
            )
        teacher.to(torch.device(Config.DEVICE)).eval()
        teacher_checkpoint_id = (
            teacher_checkpoint_id
            or f"{ModelRole.TEACHER}-{CheckpointService.fingerprint(teacher)}"
        )
        logger.info(
            f"Training student on {len(labeled)} labeled and {len(unlabeled)} "
            f"unlabeled images; teacher {teacher_checkpoint_id}, K={mc.num_passes}, "
            f"alpha={mc.alpha}, P={loss_cfg.min_class_mass}"
        )

        model = build_model(model_cfg, seed=train_cfg.seed)
        labeled_sampler = MinibatchSampler(
            len(labeled),
            train_cfg.labeled_batch,
            derive_seed(train_cfg.seed, LABELED_SAMPLER_STREAM),
        )
        unlabeled_sampler = None
        if len(unlabeled):
            unlabeled_sampler = MinibatchSampler(
                len(unlabeled),
                train_cfg.unlabeled_batch,
                derive_seed(train_cfg.seed, UNLABELED_SAMPLER_STREAM),
            )
        else:
            logger.warning("Unlabeled set is empty; the student is trained on D_l only")

        loop = _TrainingLoop(
            model, ModelRole.STUDENT, train_cfg, validation, out_dir, resume
        )

        cache: Optional[dict[str, SoftLabelRecord]] = None
        if train_cfg.precompute_soft_labels and unlabeled_sampler is not None:
            store_dir = None
            if out_dir is not None:
                store_dir = Path(out_dir) / str(ModelRole.STUDENT) / SOFT_LABEL_DIRNAME
            cache = SoftLabelService.precompute(
                teacher, unlabeled, mc, teacher_checkpoint_id, store_dir
            )

        def step(iteration: int) -> StepLosses:
            labeled_term = TrainingService._labeled_term(
                loop.model,
                labeled,
                labeled_sampler,
                train_cfg,
                augmentation,
                None,
                iteration,
            )
            if unlabeled_sampler is None:
                total = semi_supervised_loss(
                    labeled_term, 0.0, loss_cfg.unlabeled_weight, iteration
                )
                return StepLosses(total, labeled_term.item(), 0.0, 0)

            images, ids = unlabeled.collate(unlabeled_sampler.batch_indices(iteration))
            if cache is not None:
                records = [cache[image_id] for image_id in ids]
            else:
                records = SoftLabelService.generate_soft_labels(
                    teacher, images, ids, mc, teacher_checkpoint_id
                )
            context = DropoutContext.seeded(
                derive_seed(train_cfg.seed, UNLABELED_DROPOUT_STREAM, iteration)
            )
            device = next(loop.model.parameters()).device
            scores = loop.model(images.to(device), context)
            unlabeled_term = unlabeled_loss(scores, records, loss_cfg)
            total = semi_supervised_loss(
                labeled_term, unlabeled_term, loss_cfg.unlabeled_weight, iteration
            )
            return StepLosses(total, labeled_term.item(), unlabeled_term.item(), 1)

        return loop.run(step)
