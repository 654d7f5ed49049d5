import numpy as np
import pytest

from src.data.boundaries import (
    BoundarySet,
    boundaries_to_labels,
    labels_to_boundaries,
)
from src.exceptions.segmentation_exceptions import BoundaryError, LabelError


def test_flat_boundaries():
    positions = np.repeat(np.arange(10, 100, 10, dtype=float)[:, None], 3, axis=1)

    labels = boundaries_to_labels(BoundarySet(positions=positions, height=100))

    expected = np.zeros(100, dtype=np.uint8)
    for layer in range(1, 9):
        expected[10 * layer : 10 * (layer + 1)] = layer
    assert labels.shape == (100, 3)
    assert all(np.array_equal(labels[:, column], expected) for column in range(3))


def test_zero_thickness_layer():
    positions = np.array([[2.0, 2.0], [2.0, 4.0], [6.0, 6.0]])

    labels = boundaries_to_labels(BoundarySet(positions=positions, height=8))

    assert 1 not in labels[:, 0]
    assert labels[2:4, 1].tolist() == [1, 1]


def test_positions_round_half_up():
    positions = np.array([[1.5], [3.49]])

    labels = boundaries_to_labels(BoundarySet(positions=positions, height=6))

    assert labels[:, 0].tolist() == [0, 0, 1, 0, 0, 0]


def test_every_column_is_partitioned():
    rng = np.random.default_rng(0)
    positions = np.sort(rng.uniform(0, 32, (5, 16)), axis=0)

    labels = boundaries_to_labels(BoundarySet(positions=positions, height=32))

    rounded = np.floor(positions + 0.5)
    for column in range(16):
        for layer in range(1, 5):
            rows = np.flatnonzero(labels[:, column] == layer)
            thickness = rounded[layer, column] - rounded[layer - 1, column]
            assert rows.size == thickness


def test_roundtrip_through_extraction():
    rng = np.random.default_rng(1)
    steps = rng.uniform(1.5, 5.0, (3, 20))
    positions = np.vstack([np.full(20, 2.3), 2.3 + np.cumsum(steps, axis=0)])
    boundaries = BoundarySet(positions=positions, height=32)

    recovered = labels_to_boundaries(boundaries_to_labels(boundaries), 4)

    assert np.array_equal(recovered, boundaries.rounded())


def test_invalid_boundaries_are_rejected():
    with pytest.raises(BoundaryError):
        BoundarySet(positions=np.array([[3.0, 3.0], [2.0, 4.0]]), height=8)
    with pytest.raises(BoundaryError):
        BoundarySet(positions=np.array([[3.0], [9.0]]), height=8)
    with pytest.raises(BoundaryError):
        BoundarySet(positions=np.array([[1.0, np.nan], [2.0, 3.0]]), height=8)


def test_extraction_needs_every_layer():
    with pytest.raises(LabelError):
        labels_to_boundaries(np.zeros((4, 4), dtype=np.uint8), 3)
