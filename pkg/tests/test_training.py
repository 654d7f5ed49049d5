import math

import numpy as np
import pandas as pd
import pytest
import torch

from src.data.datasets import (
    LabeledDataset,
    LabeledSample,
    UnlabeledDataset,
)
from src.exceptions.segmentation_exceptions import DatasetError, DivergenceError
from src.schemas.inference_schema import McConfig
from src.segmentation.dense_unet import build_model
from src.services.checkpoint_service import (
    BEST_CHECKPOINT,
    LAST_CHECKPOINT,
    CheckpointService,
)
from src.services.experiment_service import ExperimentService
from src.services.soft_label_service import SoftLabelService
from src.services.training_service import METRICS_FILENAME, TrainingService
from src.utils.enums import StudentMethod


def _same_parameters(left, right, atol=0.0):
    left, right = left.state_dict(), right.state_dict()
    return all(
        torch.allclose(left[name].float(), right[name].float(), rtol=0, atol=atol)
        for name in left
    )


def _train_teacher(data, model_config, train_config, **kwargs):
    return TrainingService.train_teacher(
        data.train, data.validation, model_config, train_config, **kwargs
    )


def _train_student(teacher, data, model_config, train_config, **kwargs):
    kwargs.setdefault("mc", McConfig(num_passes=2))
    return TrainingService.train_student(
        teacher,
        data.train,
        kwargs.pop("unlabeled", data.unlabeled),
        data.validation,
        model_config,
        train_config,
        **kwargs,
    )


def test_validation_loss_of_uniform_model_is_log_c(model_config):
    config = model_config.model_copy(update={"num_classes": 9})
    model = build_model(config)
    with torch.no_grad():
        model.head.weight.zero_()
        model.head.bias.zero_()
    label_map = (np.arange(256) % 9).reshape(16, 16).astype(np.uint8)
    validation = LabeledDataset(
        [
            LabeledSample(
                id="v", image=np.zeros((16, 16), np.float32), label_map=label_map
            )
        ],
        num_classes=9,
    )

    loss = TrainingService.validation_loss(model, validation)
    assert loss == pytest.approx(math.log(9), abs=1e-5)


def test_validation_loss_is_deterministic(model, striped_dataset):
    duplicate = LabeledDataset(list(striped_dataset), 3)

    assert TrainingService.validation_loss(
        model, striped_dataset
    ) == TrainingService.validation_loss(model, duplicate)


def test_validation_loss_needs_images(model):
    with pytest.raises(DatasetError):
        TrainingService.validation_loss(model, LabeledDataset([], 3))


def test_empty_sets_are_rejected(model, experiment_data, model_config, train_config):
    empty = LabeledDataset([], 3)
    with pytest.raises(DatasetError):
        TrainingService.train_teacher(
            empty, experiment_data.validation, model_config, train_config
        )
    with pytest.raises(DatasetError):
        TrainingService.train_teacher(
            experiment_data.train, empty, model_config, train_config
        )
    with pytest.raises(DatasetError):
        TrainingService.train_student(
            model,
            empty,
            experiment_data.unlabeled,
            experiment_data.validation,
            model_config,
            train_config,
        )


def test_teacher_outputs_and_learning_rate_schedule(
    tmp_path, experiment_data, model_config, train_config
):
    every_iteration = train_config.model_copy(update={"validation_interval": 1})
    _train_teacher(experiment_data, model_config, every_iteration, out_dir=tmp_path)

    directory = tmp_path / "teacher"
    assert (directory / BEST_CHECKPOINT).is_file()
    assert (directory / LAST_CHECKPOINT).is_file()
    metrics = pd.read_csv(directory / METRICS_FILENAME)
    assert metrics["iteration"].tolist() == [1, 2, 3, 4, 5, 6]
    assert list(metrics.columns) == [
        "iteration",
        "lr",
        "labeled_loss",
        "unlabeled_loss",
        "total_loss",
        "validation_loss",
        "wall_clock",
    ]
    for row in metrics.itertuples():
        expected = train_config.initial_learning_rate
        if row.iteration - 1 >= train_config.lr_decay_at_iteration:
            expected *= train_config.lr_decay_factor
        assert row.lr == pytest.approx(expected)
    assert (metrics["unlabeled_loss"] == 0).all()


def test_teacher_training_is_reproducible(experiment_data, model_config, train_config):
    first = _train_teacher(experiment_data, model_config, train_config)
    second = _train_teacher(experiment_data, model_config, train_config)

    assert _same_parameters(first, second, atol=1e-5)


def test_resumed_training_matches_an_uninterrupted_run(
    tmp_path, experiment_data, model_config, train_config
):
    short = train_config.model_copy(update={"max_iterations": 3})
    resumed_dir, straight_dir = tmp_path / "resumed", tmp_path / "straight"
    _train_teacher(experiment_data, model_config, short, out_dir=resumed_dir)
    _train_teacher(
        experiment_data, model_config, train_config, out_dir=resumed_dir, resume=True
    )
    _train_teacher(experiment_data, model_config, train_config, out_dir=straight_dir)

    resumed = pd.read_csv(resumed_dir / "teacher" / METRICS_FILENAME)
    straight = pd.read_csv(straight_dir / "teacher" / METRICS_FILENAME)
    assert resumed["iteration"].tolist() == [3, 6]
    columns = ["lr", "labeled_loss", "total_loss", "validation_loss"]
    assert np.allclose(resumed[columns], straight[columns], rtol=0, atol=1e-5)
    state = CheckpointService.read(resumed_dir / "teacher" / LAST_CHECKPOINT)
    assert state["train_state"]["iteration"] == 6


def test_student_iteration_consumes_one_batch_of_each_split(
    tmp_path, mocker, model, experiment_data, model_config, train_config
):
    labeled_spy = mocker.spy(LabeledDataset, "collate")
    unlabeled_spy = mocker.spy(UnlabeledDataset, "collate")
    soft_label_spy = mocker.spy(SoftLabelService, "generate_soft_labels")

    _train_student(model, experiment_data, model_config, train_config, out_dir=tmp_path)

    iterations = train_config.max_iterations
    assert labeled_spy.call_count == iterations
    assert unlabeled_spy.call_count == iterations
    assert soft_label_spy.call_count == iterations
    state = CheckpointService.read(tmp_path / "student" / LAST_CHECKPOINT)
    counters = state["train_state"]
    assert counters["updates"] == iterations
    assert counters["labeled_batches"] == counters["unlabeled_batches"] == iterations


def test_alpha_zero_student_is_the_plain_soft_label_method(
    model, experiment_data, run_config
):
    plain = ExperimentService.train_method(
        StudentMethod.PLAIN_SLS, run_config, model, experiment_data
    )
    zero = run_config.with_overrides({"mc.alpha": 0.0, "loss.alpha": 0.0})
    direct = TrainingService.train_student(
        model,
        experiment_data.train,
        experiment_data.unlabeled,
        experiment_data.validation,
        zero.model,
        zero.train,
        zero.mc,
        zero.loss,
        zero.augmentation,
    )

    assert _same_parameters(plain, direct)


def test_precomputed_soft_labels_match_online_generation(
    tmp_path, model, experiment_data, model_config, train_config
):
    cached = train_config.model_copy(update={"precompute_soft_labels": True})

    online = _train_student(model, experiment_data, model_config, train_config)
    precomputed = _train_student(
        model, experiment_data, model_config, cached, out_dir=tmp_path
    )

    assert _same_parameters(online, precomputed, atol=1e-6)
    stored = list((tmp_path / "student" / "soft_labels").glob("*.slr"))
    assert len(stored) == len(experiment_data.unlabeled)


def test_empty_unlabeled_set_trains_on_labeled_data_only(
    tmp_path, model, experiment_data, model_config, train_config
):
    _train_student(
        model,
        experiment_data,
        model_config,
        train_config,
        unlabeled=UnlabeledDataset([]),
        out_dir=tmp_path,
    )

    metrics = pd.read_csv(tmp_path / "student" / METRICS_FILENAME)
    assert (metrics["unlabeled_loss"] == 0).all()
    assert (metrics["total_loss"] == metrics["labeled_loss"]).all()


def test_non_finite_loss_aborts_training(
    mocker, experiment_data, model_config, train_config
):
    mocker.patch(
        "src.services.training_service.labeled_loss",
        return_value=torch.tensor(float("nan"), requires_grad=True),
    )

    with pytest.raises(DivergenceError) as error:
        _train_teacher(experiment_data, model_config, train_config)
    assert error.value.iteration == 0
