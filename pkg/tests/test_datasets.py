import numpy as np
import pytest

from src.data.datasets import (
    LabeledDataset,
    LabeledSample,
    MinibatchSampler,
    UnlabeledDataset,
    UnlabeledSample,
    split_validation,
)
from src.exceptions.segmentation_exceptions import DatasetError, LabelError, ShapeError
from src.schemas.training_schema import AugmentationConfig


def test_epoch_visits_every_item_once():
    sampler = MinibatchSampler(16, 1, seed=3)

    epoch = [sampler.batch_indices(i)[0] for i in range(16)]
    assert sorted(epoch) == list(range(16))


def test_epochs_are_reshuffled():
    sampler = MinibatchSampler(16, 4, seed=3)

    first = sum((sampler.batch_indices(i) for i in range(4)), [])
    second = sum((sampler.batch_indices(i) for i in range(4, 8)), [])
    assert sorted(second) == list(range(16))
    assert first != second


def test_sampler_is_stateless_per_seed():
    stream = [MinibatchSampler(10, 3, seed=5).batch_indices(i) for i in range(8)]
    fresh = MinibatchSampler(10, 3, seed=5)

    assert [fresh.batch_indices(i) for i in reversed(range(8))][::-1] == stream
    other = MinibatchSampler(10, 10, seed=6).batch_indices(0)
    assert other != MinibatchSampler(10, 10, seed=5).batch_indices(0)


def test_sampler_needs_items():
    with pytest.raises(DatasetError):
        MinibatchSampler(0, 1, seed=0)


def test_labeled_samples_are_validated():
    image = np.zeros((4, 4), np.float32)
    with pytest.raises(LabelError):
        LabeledDataset(
            [LabeledSample(id="a", image=image, label_map=np.full((4, 4), 3))], 3
        )
    with pytest.raises(ShapeError):
        LabeledDataset(
            [LabeledSample(id="a", image=image, label_map=np.zeros((4, 5), int))], 3
        )
    with pytest.raises(DatasetError):
        UnlabeledDataset([UnlabeledSample(id="u", image=image + 2.0)])


def test_collate_stacks_a_batch(striped_dataset):
    images, labels, ids = striped_dataset.collate([1, 0])

    assert images.shape == (2, 1, 16, 16)
    assert labels.shape == (2, 16, 16)
    assert ids == ["striped_1", "striped_0"]
    assert labels[0, 4, 0] == 0 and labels[1, 4, 0] == 1


def test_augmented_collate_is_seeded(striped_dataset):
    augmentation = AugmentationConfig()

    first = striped_dataset.collate([0, 1], augmentation, seed=9)
    second = striped_dataset.collate([0, 1], augmentation, seed=9)
    assert all(a.equal(b) for a, b in zip(first[:2], second[:2]))


def test_split_validation(experiment_data):
    labeled = experiment_data.train
    train, validation = split_validation(labeled, 1, seed=0)

    assert len(train) + len(validation) == len(labeled)
    assert set(train.ids).isdisjoint(validation.ids)
    with pytest.raises(DatasetError):
        split_validation(labeled, len(labeled), seed=0)
