"""
Static images for inspection.

Overlay panels are placed side by side, each exactly H x W: the input, the
ground truth (when available), the prediction and the uncertainty heat map.
Labels are coloured with matplotlib's "tab10" palette (class 0 black). The
heat map uses "inferno" on the fixed range [0, ln C], so u = 0 renders as
the darkest (coolest) colour and warmer colours mean higher entropy.
"""

import math
from pathlib import Path
from typing import Mapping, Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import torch  # noqa: E402
from loguru import logger  # noqa: E402
from matplotlib import colormaps  # noqa: E402
from PIL import Image  # noqa: E402

from src.exceptions.segmentation_exceptions import ShapeError  # noqa: E402
from src.schemas.report_schema import PrCurve  # noqa: E402

LABEL_COLORMAP = "tab10"
HEAT_COLORMAP = "inferno"
HEAT_LEVELS = 256


def _as_array(grid: np.ndarray | torch.Tensor) -> np.ndarray:
    if isinstance(grid, torch.Tensor):
        return grid.detach().cpu().numpy()
    return np.asarray(grid)


def colorize_labels(label_map: np.ndarray) -> np.ndarray:
    palette = np.array(colormaps[LABEL_COLORMAP].colors)[:, :3]
    palette = (palette * 255).round().astype(np.uint8)
    labels = label_map.astype(np.int64)
    colours = palette[(labels - 1) % len(palette)]
    colours[labels == 0] = 0
    return colours


def heat_indices(uncertainty: np.ndarray, max_value: float) -> np.ndarray:
    """Colormap entry per pixel: u scaled from [0, max_value] onto 0..255."""
    scaled = np.clip(uncertainty / max_value, 0.0, 1.0)
    return np.round(scaled * (HEAT_LEVELS - 1)).astype(np.int64)


def heat_map(uncertainty: np.ndarray, max_value: float) -> np.ndarray:
    lut = colormaps[HEAT_COLORMAP].resampled(HEAT_LEVELS)(np.arange(HEAT_LEVELS))
    colours = lut[heat_indices(uncertainty, max_value), :3]
    return (colours * 255).round().astype(np.uint8)


def grayscale(image: np.ndarray) -> np.ndarray:
    channel = np.round(np.clip(image, 0.0, 1.0) * 255).astype(np.uint8)
    return np.repeat(channel[..., None], 3, axis=-1)


class RenderingService:
    @staticmethod
    def overlay_panels(
        image: np.ndarray | torch.Tensor,
        prediction: np.ndarray | torch.Tensor,
        uncertainty: np.ndarray | torch.Tensor,
        num_classes: int,
        ground_truth: Optional[np.ndarray | torch.Tensor] = None,
    ) -> np.ndarray:
        image = _as_array(image)
        grids = {
            "prediction": _as_array(prediction),
            "uncertainty": _as_array(uncertainty),
        }
        if ground_truth is not None:
            grids["ground_truth"] = _as_array(ground_truth)
        for name, grid in grids.items():
            if grid.shape != image.shape:
                raise ShapeError(
                    f"{name} {grid.shape} is not aligned with image {image.shape}"
                )
        panels = [grayscale(image)]
        if ground_truth is not None:
            panels.append(colorize_labels(grids["ground_truth"]))
        panels.append(colorize_labels(grids["prediction"]))
        panels.append(heat_map(grids["uncertainty"], math.log(num_classes)))
        return np.concatenate(panels, axis=1)

    @staticmethod
    def render_overlays(
        path: Path,
        image: np.ndarray | torch.Tensor,
        prediction: np.ndarray | torch.Tensor,
        uncertainty: np.ndarray | torch.Tensor,
        num_classes: int,
        ground_truth: Optional[np.ndarray | torch.Tensor] = None,
    ) -> Path:
        panels = RenderingService.overlay_panels(
            image, prediction, uncertainty, num_classes, ground_truth
        )
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(panels).save(path)
        logger.info(f"Wrote overlay panels {path}")
        return path

    @staticmethod
    def plot_pr_curves(
        curves: Mapping[str, PrCurve], path: Path, title: str = ""
    ) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        figure, axis = plt.subplots(figsize=(5, 5))
        for label, curve in curves.items():
            axis.plot(curve.recall, curve.precision, label=label)
        axis.set_xlabel("recall")
        axis.set_ylabel("precision")
        axis.set_xlim(0.0, 1.0)
        axis.set_ylim(0.0, 1.05)
        axis.set_title(title)
        axis.legend(loc="lower left")
        figure.savefig(path, dpi=100)
        plt.close(figure)
        logger.info(f"Wrote precision-recall plot {path}")
        return path
