"""
Datasets on disk.

Layout below a dataset directory:

    manifest.yaml          ids, splits, relative paths, generator config
    images/<id>.png        16-bit (or 8-bit) grayscale raster
    labels/<id>.png        8-bit raster of class indices
    boundaries/<id>.csv    optional: K rows x W columns of row positions

Images are normalized to [0, 1] by their bit depth when loaded.
"""

from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd
import yaml
from loguru import logger
from PIL import Image
from pydantic import ValidationError

from src.data.boundaries import (
    BoundarySet,
    boundaries_to_labels,
    labels_to_boundaries,
)
from src.data.datasets import (
    LabeledDataset,
    LabeledSample,
    UnlabeledDataset,
    UnlabeledSample,
)
from src.exceptions.segmentation_exceptions import DatasetError
from src.schemas.data_schema import DatasetManifest, ManifestEntry, SynthConfig
from src.utils.enums import DatasetSplit
from src.utils.json_processor import replace_inf_values, restore_inf_values

MANIFEST_FILENAME = "manifest.yaml"


def save_image(path: Path, image: np.ndarray) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    raster = np.round(np.clip(image, 0.0, 1.0) * 65535.0).astype(np.uint16)
    Image.fromarray(raster).save(path)


def load_image(path: Path) -> np.ndarray:
    if not path.is_file():
        raise DatasetError(f"image file {path} does not exist")
    with Image.open(path) as raster:
        mode = raster.mode
        pixels = np.array(raster)
    if mode in ("L", "P"):
        return (pixels / 255.0).astype(np.float32)
    if mode.startswith("I;16") or mode == "I":
        return (pixels.astype(np.float64) / 65535.0).clip(0.0, 1.0).astype(np.float32)
    raise DatasetError(
        f"{path}: unsupported raster mode {mode}; use 8/16-bit grayscale"
    )


def save_label_map(path: Path, label_map: np.ndarray) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(label_map.astype(np.uint8)).save(path)


def load_label_map(path: Path) -> np.ndarray:
    if not path.is_file():
        raise DatasetError(f"label file {path} does not exist")
    with Image.open(path) as raster:
        if raster.mode not in ("L", "P"):
            raise DatasetError(
                f"{path}: label rasters must be 8-bit, got {raster.mode}"
            )
        return np.array(raster, dtype=np.uint8)


def save_boundaries(path: Path, positions: np.ndarray) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(positions).to_csv(path, header=False, index=False)


def load_boundaries(path: Path, height: int) -> BoundarySet:
    if not path.is_file():
        raise DatasetError(f"boundary file {path} does not exist")
    positions = pd.read_csv(path, header=None).to_numpy(dtype=np.float64)
    return BoundarySet(positions=positions, height=height)


def write_manifest(directory: Path, manifest: DatasetManifest) -> Path:
    path = directory / MANIFEST_FILENAME
    with path.open("w") as handle:
        yaml.safe_dump(
            replace_inf_values(manifest.model_dump(mode="json")),
            handle,
            sort_keys=False,
        )
    return path


def read_manifest(directory: Path) -> DatasetManifest:
    path = Path(directory) / MANIFEST_FILENAME
    if not path.is_file():
        raise DatasetError(f"no dataset manifest at {path}")
    with path.open() as handle:
        values = yaml.safe_load(handle) or {}
    try:
        return DatasetManifest.model_validate(restore_inf_values(values))
    except ValidationError as error:
        raise DatasetError(f"invalid manifest {path}: {error}") from error


def _labeled_entry(directory: Path, entry: ManifestEntry) -> LabeledSample:
    image = load_image(directory / entry.image)
    if entry.label is not None:
        label_map = load_label_map(directory / entry.label)
    elif entry.boundaries is not None:
        boundaries = load_boundaries(directory / entry.boundaries, image.shape[0])
        label_map = boundaries_to_labels(boundaries, image.shape[0])
    else:
        raise DatasetError(f"sample {entry.id} has neither a label map nor boundaries")
    return LabeledSample(id=entry.id, image=image, label_map=label_map)


def load_labeled_split(directory: Path, split: DatasetSplit) -> LabeledDataset:
    directory = Path(directory)
    manifest = read_manifest(directory)
    entries = manifest.entries(split)
    samples = [_labeled_entry(directory, entry) for entry in entries]
    logger.info(f"Loaded {len(samples)} labeled images from split {split}")
    return LabeledDataset(samples, manifest.num_classes)


def load_unlabeled_split(directory: Path) -> UnlabeledDataset:
    directory = Path(directory)
    entries = read_manifest(directory).entries(DatasetSplit.UNLABELED)
    samples = [
        UnlabeledSample(id=entry.id, image=load_image(directory / entry.image))
        for entry in entries
    ]
    logger.info(f"Loaded {len(samples)} unlabeled images")
    return UnlabeledDataset(samples)


def write_dataset(
    directory: Path,
    splits: dict[DatasetSplit, LabeledDataset | UnlabeledDataset],
    num_classes: int,
    generator: Optional[SynthConfig] = None,
    with_boundaries: bool = False,
) -> Path:
    """
    Write every split as rasters plus the manifest; returns the manifest path.
    With `with_boundaries` labeled samples also get a boundary CSV extracted
    from their label map.
    """
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as error:
        raise DatasetError(
            f"cannot create dataset directory {directory}: {error}"
        ) from error
    entries: list[ManifestEntry] = []
    for split, dataset in splits.items():
        for sample in dataset:
            image_path = Path("images") / f"{sample.id}.png"
            save_image(directory / image_path, sample.image)
            label_path = boundary_path = None
            if isinstance(sample, LabeledSample):
                label_path = Path("labels") / f"{sample.id}.png"
                save_label_map(directory / label_path, sample.label_map)
                if with_boundaries:
                    boundary_path = Path("boundaries") / f"{sample.id}.csv"
                    save_boundaries(
                        directory / boundary_path,
                        labels_to_boundaries(sample.label_map, num_classes),
                    )
            entries.append(
                ManifestEntry(
                    id=sample.id,
                    split=split,
                    image=image_path.as_posix(),
                    label=None if label_path is None else label_path.as_posix(),
                    boundaries=(
                        None if boundary_path is None else boundary_path.as_posix()
                    ),
                )
            )
    manifest = DatasetManifest(
        num_classes=num_classes, generator=generator, samples=entries
    )
    path = write_manifest(directory, manifest)
    logger.info(f"Wrote {len(entries)} samples and manifest {path}")
    return path
