import os

os.environ.setdefault("ENVIRONMENT", "TEST")

import numpy as np  # noqa: E402
import pytest  # noqa: E402

from src.data.datasets import LabeledDataset, LabeledSample  # noqa: E402
from src.schemas.data_schema import DatasetSizes, SynthConfig  # noqa: E402
from src.schemas.inference_schema import McConfig  # noqa: E402
from src.schemas.model_schema import ModelConfig  # noqa: E402
from src.schemas.run_schema import PathsConfig, RunConfig  # noqa: E402
from src.schemas.training_schema import TrainConfig  # noqa: E402
from src.segmentation.dense_unet import build_model  # noqa: E402
from src.services.experiment_service import ExperimentService  # noqa: E402


@pytest.fixture
def model_config() -> ModelConfig:
    return ModelConfig(
        num_classes=3,
        units_per_block=2,
        filters_per_unit=2,
        num_encoder_blocks=2,
        dropout_rate=0.2,
    )


@pytest.fixture
def model(model_config):
    return build_model(model_config, seed=0)


@pytest.fixture
def train_config() -> TrainConfig:
    return TrainConfig(
        max_iterations=6,
        initial_learning_rate=1e-3,
        lr_decay_at_iteration=4,
        validation_interval=3,
        early_stop_patience=0,
    )


@pytest.fixture
def run_config(tmp_path, model_config, train_config) -> RunConfig:
    return RunConfig(
        model=model_config,
        mc=McConfig(num_passes=2),
        train=train_config,
        synth=SynthConfig(image_size=(16, 16), num_classes=3),
        dataset=DatasetSizes(n_labeled=4, n_validation=2, n_unlabeled=3, n_test=2),
        paths=PathsConfig(data_dir=tmp_path / "data", out_dir=tmp_path / "runs"),
        alpha_sweep=[0.0, 2.0],
        comparison_seeds=[0],
    )


@pytest.fixture
def config_file(tmp_path, run_config):
    return run_config.to_yaml(tmp_path / "config.yaml")


@pytest.fixture
def experiment_data(run_config):
    return ExperimentService.synthesize(run_config)


@pytest.fixture
def striped_dataset() -> LabeledDataset:
    """Two 16x16 images of horizontal class bands 0, 1, 2."""
    samples = []
    for index in range(2):
        label_map = np.zeros((16, 16), dtype=np.uint8)
        label_map[4 + index : 9, :] = 1
        label_map[9:14, :] = 2
        image = (0.2 + 0.3 * label_map).astype(np.float32)
        samples.append(
            LabeledSample(id=f"striped_{index}", image=image, label_map=label_map)
        )
    return LabeledDataset(samples, num_classes=3)
