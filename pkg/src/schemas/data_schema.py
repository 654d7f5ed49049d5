from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.utils.enums import DatasetSplit


class SynthConfig(BaseModel):
    """Synthetic layered-image generator settings."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    image_size: tuple[int, int] = (64, 64)
    num_classes: int = Field(9, ge=2)
    boundary_smoothness: int = Field(3, ge=1)
    """Number of low-frequency sinusoids summed per boundary curve."""
    layer_intensity_means: Optional[list[float]] = None
    """Mean intensity per class (background first); evenly spaced when unset."""
    noise_std: float = Field(0.05, ge=0.0)
    contrast_jitter: float = Field(0.1, ge=0.0, lt=1.0)
    min_layer_thickness: int = Field(2, ge=1)
    seed: int = 0

    @model_validator(mode="after")
    def _check_geometry(self) -> "SynthConfig":
        height, width = self.image_size
        if height < 16 or width < 1:
            raise ValueError("image_size needs at least 16 rows and one column")
        means = self.layer_intensity_means
        if means is not None and len(means) != self.num_classes:
            raise ValueError(
                f"layer_intensity_means needs {self.num_classes} entries, "
                f"got {len(means)}"
            )
        if self.smallest_mean_thickness < self.min_layer_thickness + 1:
            raise ValueError(
                f"image height {height} is too small for {self.num_classes - 1} "
                f"layers of at least {self.min_layer_thickness} rows"
            )
        return self

    @property
    def num_layers(self) -> int:
        return self.num_classes - 1

    @property
    def mean_layer_thickness(self) -> float:
        return 0.5 * self.image_size[0] / self.num_layers

    @property
    def smallest_mean_thickness(self) -> float:
        return 0.75 * self.mean_layer_thickness

    def intensity_means(self) -> list[float]:
        if self.layer_intensity_means is not None:
            return list(self.layer_intensity_means)
        step = 0.5 / (self.num_classes - 1)
        return [0.25 + step * index for index in range(self.num_classes)]


class ManifestEntry(BaseModel):
    id: str = Field(min_length=1)
    split: DatasetSplit
    image: str
    label: Optional[str] = None
    boundaries: Optional[str] = None


class DatasetManifest(BaseModel):
    """Index of a dataset on disk; paths are relative to the manifest."""

    num_classes: int = Field(ge=2)
    generator: Optional[SynthConfig] = None
    samples: List[ManifestEntry] = []

    def entries(self, split: DatasetSplit) -> list[ManifestEntry]:
        return [entry for entry in self.samples if entry.split == split]


class DatasetSizes(BaseModel):
    """How many images `synth-data` writes per split."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    n_labeled: int = Field(20, ge=1)
    n_validation: int = Field(10, ge=1)
    n_unlabeled: int = Field(200, ge=0)
    n_test: int = Field(50, ge=1)
