import numpy as np
import pytest
from pydantic import ValidationError

from src.data.synthetic import generate_synthetic_dataset
from src.exceptions.segmentation_exceptions import DatasetError
from src.schemas.data_schema import SynthConfig


@pytest.fixture
def synth():
    return SynthConfig(image_size=(32, 32), num_classes=4, noise_std=0.05, seed=7)


def test_generation_is_deterministic(synth):
    first = generate_synthetic_dataset(synth, 3, 2, 2)
    second = generate_synthetic_dataset(synth, 3, 2, 2)

    for left, right in zip(first, second):
        assert left.ids == right.ids
        for a, b in zip(left, right):
            assert a.image.tobytes() == b.image.tobytes()
    for a, b in zip(first[0], second[0]):
        assert a.label_map.tobytes() == b.label_map.tobytes()


def test_split_sizes_and_ranges(synth):
    labeled, unlabeled, test = generate_synthetic_dataset(synth, 3, 4, 2)

    assert (len(labeled), len(unlabeled), len(test)) == (3, 4, 2)
    assert set(labeled.ids).isdisjoint(test.ids)
    for sample in [*labeled, *unlabeled, *test]:
        assert sample.image.shape == (32, 32)
        assert sample.image.dtype == np.float32
        assert 0.0 <= sample.image.min() and sample.image.max() <= 1.0


def test_every_class_is_present(synth):
    labeled, _, test = generate_synthetic_dataset(synth, 10, 0, 10)

    for sample in [*labeled, *test]:
        counts = np.bincount(sample.label_map.ravel(), minlength=4)
        assert counts.size == 4 and np.all(counts > 0)


def test_noiseless_images_are_piecewise_constant(synth):
    clean = synth.model_copy(update={"noise_std": 0.0, "contrast_jitter": 0.0})
    labeled, _, _ = generate_synthetic_dataset(clean, 2, 0, 0)

    for sample in labeled:
        levels = [np.unique(sample.image[sample.label_map == c]) for c in range(4)]
        assert all(level.size == 1 for level in levels)
        assert len({float(level[0]) for level in levels}) == 4


def test_layer_intensity_statistics(synth):
    labeled, _, _ = generate_synthetic_dataset(synth, 8, 0, 0)
    images = np.stack([sample.image for sample in labeled])
    labels = np.stack([sample.label_map for sample in labeled])

    for class_id, mean in enumerate(synth.intensity_means()):
        pixels = images[labels == class_id]
        tolerance = 3 * synth.noise_std / np.sqrt(pixels.size)
        assert abs(pixels.mean() - mean) < tolerance


def test_empty_labeled_split_is_rejected(synth):
    with pytest.raises(DatasetError):
        generate_synthetic_dataset(synth, 0, 1, 1)


def test_geometry_is_validated():
    with pytest.raises(ValidationError):
        SynthConfig(image_size=(16, 16), num_classes=9)
    with pytest.raises(ValidationError):
        SynthConfig(num_classes=3, layer_intensity_means=[0.1, 0.2])
