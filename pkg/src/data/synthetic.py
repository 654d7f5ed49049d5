"""
Synthetic layered images standing in for retinal B-scans.

Each image stacks `num_classes - 1` layers between smooth random surfaces.
The top surface and every layer thickness are a base value plus a sum of
low-frequency sinusoids whose amplitudes are bounded, so surfaces are
monotone by construction and every layer is at least `min_layer_thickness`
rows thick in every column. Intensities are per-class means plus Gaussian
noise; unlabeled images additionally get a random contrast gain and noise
level.
"""

import numpy as np
from loguru import logger

from src.data.boundaries import BoundarySet, boundaries_to_labels
from src.data.datasets import (
    LabeledDataset,
    LabeledSample,
    UnlabeledDataset,
    UnlabeledSample,
)
from src.exceptions.segmentation_exceptions import DatasetError
from src.schemas.data_schema import SynthConfig
from src.utils.seeding import rng_for

LABELED_STREAM = 0
UNLABELED_STREAM = 1
TEST_STREAM = 2


def _smooth_curve(
    rng: np.random.Generator, width: int, components: int, amplitude: float
) -> np.ndarray:
    """Sum of `components` sinusoids with total amplitude at most `amplitude`."""
    x = np.arange(width, dtype=np.float64) / width
    curve = np.zeros(width, dtype=np.float64)
    for harmonic in range(1, components + 1):
        frequency = harmonic * rng.uniform(0.5, 1.0)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        weight = rng.uniform(-1.0, 1.0) * amplitude / components
        curve += weight * np.sin(2.0 * np.pi * frequency * x + phase)
    return curve


def random_boundaries(cfg: SynthConfig, rng: np.random.Generator) -> BoundarySet:
    height, width = cfg.image_size
    top = height * rng.uniform(0.1, 0.3) + _smooth_curve(
        rng, width, cfg.boundary_smoothness, 0.05 * height
    )
    mean_thickness = cfg.mean_layer_thickness
    thicknesses = [
        mean_thickness
        + _smooth_curve(rng, width, cfg.boundary_smoothness, 0.25 * mean_thickness)
        for _ in range(cfg.num_layers)
    ]
    positions = np.vstack([top, top + np.cumsum(thicknesses, axis=0)])
    return BoundarySet(positions=positions, height=height)


def render_image(
    label_map: np.ndarray,
    means: np.ndarray,
    noise_std: float,
    rng: np.random.Generator,
    gain: float = 1.0,
) -> np.ndarray:
    image = 0.5 + (means[label_map] - 0.5) * gain
    if noise_std > 0:
        image = image + rng.normal(0.0, noise_std, size=label_map.shape)
    return np.clip(image, 0.0, 1.0).astype(np.float32)


def _labeled_samples(cfg: SynthConfig, count: int, stream: int, prefix: str):
    means = np.asarray(cfg.intensity_means(), dtype=np.float64)
    samples = []
    for index in range(count):
        rng = rng_for(cfg.seed, stream, index)
        boundaries = random_boundaries(cfg, rng)
        label_map = boundaries_to_labels(boundaries)
        image = render_image(label_map, means, cfg.noise_std, rng)
        samples.append(
            LabeledSample(id=f"{prefix}_{index:05d}", image=image, label_map=label_map)
        )
    return samples


def _unlabeled_samples(cfg: SynthConfig, count: int):
    means = np.asarray(cfg.intensity_means(), dtype=np.float64)
    jitter = cfg.contrast_jitter
    samples = []
    for index in range(count):
        rng = rng_for(cfg.seed, UNLABELED_STREAM, index)
        label_map = boundaries_to_labels(random_boundaries(cfg, rng))
        gain = 1.0 + rng.uniform(-jitter, jitter)
        noise_std = cfg.noise_std * (1.0 + rng.uniform(0.0, jitter))
        image = render_image(label_map, means, noise_std, rng, gain=gain)
        samples.append(UnlabeledSample(id=f"unlabeled_{index:05d}", image=image))
    return samples


def generate_synthetic_dataset(
    cfg: SynthConfig, n_labeled: int, n_unlabeled: int, n_test: int
) -> tuple[LabeledDataset, UnlabeledDataset, LabeledDataset]:
    """Deterministic per `cfg.seed`: image i of a split depends on (seed, split, i)."""
    if n_labeled < 1:
        raise DatasetError("the labeled split needs at least one image")
    if n_unlabeled < 0 or n_test < 0:
        raise DatasetError("split sizes must be non-negative")
    logger.info(
        f"Generating synthetic corpus: {n_labeled} labeled, {n_unlabeled} "
        f"unlabeled, {n_test} test images of size {cfg.image_size}"
    )
    labeled = LabeledDataset(
        _labeled_samples(cfg, n_labeled, LABELED_STREAM, "labeled"), cfg.num_classes
    )
    unlabeled = UnlabeledDataset(_unlabeled_samples(cfg, n_unlabeled))
    test = LabeledDataset(
        _labeled_samples(cfg, n_test, TEST_STREAM, "test"), cfg.num_classes
    )
    return labeled, unlabeled, test
