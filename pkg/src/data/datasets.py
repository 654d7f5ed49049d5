from typing import Optional, Sequence

import numpy as np
import torch
from pydantic import BaseModel, ConfigDict, Field
from torch.utils.data import Dataset

from src.data.augmentation import augment
from src.exceptions.segmentation_exceptions import DatasetError, LabelError, ShapeError
from src.schemas.training_schema import AugmentationConfig
from src.utils.seeding import derive_seed, rng_for


class LabeledSample(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    id: str = Field(min_length=1)
    image: np.ndarray
    """(H, W) float32 intensities in [0, 1]."""
    label_map: np.ndarray
    """(H, W) integer classes in [0, C - 1]."""


class UnlabeledSample(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    id: str = Field(min_length=1)
    image: np.ndarray


def _check_image(sample_id: str, image: np.ndarray) -> None:
    if image.ndim != 2:
        raise ShapeError(f"image {sample_id} must be 2-D, got shape {image.shape}")
    if image.size and (image.min() < 0.0 or image.max() > 1.0):
        raise DatasetError(f"image {sample_id} is not normalized to [0, 1]")


class LabeledDataset(Dataset):
    """Immutable D_l; every sample is validated on construction."""

    def __init__(self, samples: Sequence[LabeledSample], num_classes: int):
        self.num_classes = num_classes
        for sample in samples:
            _check_image(sample.id, sample.image)
            if sample.label_map.shape != sample.image.shape:
                raise ShapeError(
                    f"label map {sample.label_map.shape} of {sample.id} does not "
                    f"match image {sample.image.shape}"
                )
            labels = sample.label_map
            if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
                raise LabelError(
                    f"labels of {sample.id} must lie in [0, {num_classes - 1}]"
                )
        self._samples = tuple(samples)

    def __len__(self) -> int:
        return len(self._samples)

    def __getitem__(self, index: int) -> LabeledSample:
        return self._samples[index]

    def __iter__(self):
        return iter(self._samples)

    @property
    def ids(self) -> list[str]:
        return [sample.id for sample in self._samples]

    def label_maps(self) -> list[np.ndarray]:
        return [sample.label_map for sample in self._samples]

    def subset(self, indices: Sequence[int]) -> "LabeledDataset":
        return LabeledDataset([self._samples[i] for i in indices], self.num_classes)

    def collate(
        self,
        indices: Sequence[int],
        augmentation: Optional[AugmentationConfig] = None,
        seed: int = 0,
    ) -> tuple[torch.Tensor, torch.Tensor, list[str]]:
        """
        Stack samples into images (B, 1, H, W) and labels (B, H, W); with an
        augmentation config sample j is transformed with derive_seed(seed, j).
        """
        images, labels = [], []
        for position, index in enumerate(indices):
            sample = self._samples[index]
            image, label_map = sample.image, sample.label_map
            if augmentation is not None:
                image, label_map = augment(
                    image, label_map, augmentation, derive_seed(seed, position)
                )
            images.append(torch.from_numpy(np.ascontiguousarray(image, np.float32)))
            labels.append(torch.from_numpy(label_map.astype(np.int64)))
        ids = [self._samples[index].id for index in indices]
        return torch.stack(images).unsqueeze(1), torch.stack(labels), ids


class UnlabeledDataset(Dataset):
    """Immutable D_u."""

    def __init__(self, samples: Sequence[UnlabeledSample]):
        for sample in samples:
            _check_image(sample.id, sample.image)
        self._samples = tuple(samples)

    def __len__(self) -> int:
        return len(self._samples)

    def __getitem__(self, index: int) -> UnlabeledSample:
        return self._samples[index]

    def __iter__(self):
        return iter(self._samples)

    @property
    def ids(self) -> list[str]:
        return [sample.id for sample in self._samples]

    def collate(self, indices: Sequence[int]) -> tuple[torch.Tensor, list[str]]:
        images = [
            torch.from_numpy(np.ascontiguousarray(self._samples[i].image, np.float32))
            for i in indices
        ]
        ids = [self._samples[i].id for i in indices]
        return torch.stack(images).unsqueeze(1), ids


class MinibatchSampler:
    """
    Seeded, stateless minibatch stream over `size` items.

    The stream is a concatenation of epochs; epoch e is a permutation drawn
    from derive_seed(seed, e), and minibatch i covers stream positions
    [i * batch_size, (i + 1) * batch_size). Resuming at iteration i therefore
    needs nothing but i.
    """

    def __init__(self, size: int, batch_size: int, seed: int):
        if size < 1:
            raise DatasetError("cannot sample minibatches from an empty dataset")
        if batch_size < 1:
            raise DatasetError(f"batch size must be positive, got {batch_size}")
        self.size = size
        self.batch_size = batch_size
        self.seed = seed
        self._orders: dict[int, np.ndarray] = {}

    def epoch_order(self, epoch: int) -> np.ndarray:
        if epoch not in self._orders:
            self._orders = {epoch: rng_for(self.seed, epoch).permutation(self.size)}
        return self._orders[epoch]

    def batch_indices(self, iteration: int) -> list[int]:
        start = iteration * self.batch_size
        positions = range(start, start + self.batch_size)
        return [
            int(self.epoch_order(position // self.size)[position % self.size])
            for position in positions
        ]


def split_validation(
    dataset: LabeledDataset, n_validation: int, seed: int
) -> tuple[LabeledDataset, LabeledDataset]:
    if not 0 < n_validation < len(dataset):
        raise DatasetError(
            f"cannot hold out {n_validation} of {len(dataset)} labeled images"
        )
    order = rng_for(seed, len(dataset)).permutation(len(dataset))
    validation = sorted(order[:n_validation].tolist())
    train = sorted(order[n_validation:].tolist())
    return dataset.subset(train), dataset.subset(validation)
