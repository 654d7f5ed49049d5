"""
Layer boundaries <-> region label maps.

A BoundarySet holds K = num_classes curves (one row position per column,
top surface first). Rows in [boundary_k, boundary_{k+1}) belong to layer k;
rows above the first or at/below the last boundary are background (class 0).
Positions are rounded half-up to integer rows.
"""

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from src.exceptions.segmentation_exceptions import BoundaryError, LabelError


class BoundarySet(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    positions: np.ndarray
    """(K, W) real row positions."""
    height: int

    @model_validator(mode="after")
    def _check_curves(self) -> "BoundarySet":
        positions = self.positions
        if positions.ndim != 2 or positions.shape[0] < 2:
            raise BoundaryError(
                f"boundaries must be a (K >= 2, W) array, got {positions.shape}"
            )
        if not np.isfinite(positions).all():
            raise BoundaryError("boundary positions must be finite")
        if positions.min() < 0 or positions.max() > self.height:
            raise BoundaryError(f"boundary positions must lie in [0, {self.height}]")
        decreasing = np.argwhere(np.diff(positions, axis=0) < 0)
        if decreasing.size:
            surface, column = decreasing[0]
            raise BoundaryError(
                f"boundary {surface + 2} lies above boundary {surface + 1} "
                f"in column {column}"
            )
        return self

    @property
    def num_classes(self) -> int:
        return self.positions.shape[0]

    @property
    def width(self) -> int:
        return self.positions.shape[1]

    def rounded(self) -> np.ndarray:
        return np.floor(self.positions + 0.5).astype(np.int64)


def boundaries_to_labels(
    boundaries: BoundarySet, height: int | None = None
) -> np.ndarray:
    height = boundaries.height if height is None else height
    if height != boundaries.height:
        boundaries = BoundarySet(positions=boundaries.positions, height=height)
    rows = np.arange(height).reshape(height, 1, 1)
    # number of surfaces at or above each row
    crossed = (rows >= boundaries.rounded()[np.newaxis]).sum(axis=1)
    labels = np.where(crossed < boundaries.num_classes, crossed, 0)
    return labels.astype(np.uint8)


def labels_to_boundaries(label_map: np.ndarray, num_classes: int) -> np.ndarray:
    """
    Inverse of `boundaries_to_labels` for maps whose layers are all present
    in every column; returns integer row positions as a (K, W) float array.
    """
    if label_map.ndim != 2:
        raise LabelError(f"label map must be 2-D, got shape {label_map.shape}")
    height, width = label_map.shape
    positions = np.zeros((num_classes, width), dtype=np.float64)
    for layer in range(1, num_classes):
        mask = label_map == layer
        missing = ~mask.any(axis=0)
        if missing.any():
            raise LabelError(
                f"layer {layer} is empty in column {int(np.flatnonzero(missing)[0])}"
            )
        positions[layer - 1] = mask.argmax(axis=0)
        if layer == num_classes - 1:
            positions[layer] = height - mask[::-1].argmax(axis=0)
    return positions
