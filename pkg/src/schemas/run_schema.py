"""
Composite run configuration.

Resolution order: command-line flags override the YAML file given with
`--config`, which overrides the defaults below. The resolved configuration is
what gets written next to every command's outputs.
"""

from pathlib import Path
from typing import Any, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from src.exceptions.segmentation_exceptions import ConfigurationError
from src.schemas.data_schema import DatasetSizes, SynthConfig
from src.schemas.inference_schema import McConfig
from src.schemas.loss_schema import LossConfig
from src.schemas.model_schema import ModelConfig
from src.schemas.training_schema import AugmentationConfig, TrainConfig
from src.utils.enums import StudentMethod
from src.utils.json_processor import replace_inf_values, restore_inf_values

RUN_CONFIG_FILENAME = "run_config.yaml"


class PathsConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    data_dir: Path = Path("data")
    out_dir: Path = Path("runs")
    teacher_checkpoint: Optional[Path] = None


class RunConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    seed: int = 0
    model: ModelConfig = ModelConfig()
    mc: McConfig = McConfig()
    loss: LossConfig = LossConfig()
    train: TrainConfig = TrainConfig()
    teacher_train: Optional[TrainConfig] = None
    """Teacher schedule; the student's `train` settings are reused when unset."""
    augmentation: AugmentationConfig = AugmentationConfig()
    synth: SynthConfig = SynthConfig()
    dataset: DatasetSizes = DatasetSizes()
    student_method: StudentMethod = StudentMethod.U_SLS
    paths: PathsConfig = PathsConfig()
    alpha_sweep: list[float] = Field(default_factory=lambda: [0.0, 1.0, 2.0, 4.0])
    comparison_seeds: list[int] = Field(default_factory=lambda: [0, 1, 2])

    @model_validator(mode="after")
    def _check_consistency(self) -> "RunConfig":
        if self.mc.alpha != self.loss.alpha:
            raise ValueError(
                f"mc.alpha ({self.mc.alpha}) and loss.alpha ({self.loss.alpha}) "
                "must be equal"
            )
        if self.synth.num_classes != self.model.num_classes:
            raise ValueError(
                f"synth.num_classes ({self.synth.num_classes}) differs from "
                f"model.num_classes ({self.model.num_classes})"
            )
        divisor = self.model.spatial_divisor
        if any(size % divisor for size in self.synth.image_size):
            raise ValueError(
                f"synth.image_size {self.synth.image_size} must be divisible by "
                f"{divisor} (2^num_encoder_blocks)"
            )
        weights = self.loss.teacher_class_weights
        if weights is not None and len(weights) != self.model.num_classes:
            raise ValueError(
                f"loss.teacher_class_weights needs {self.model.num_classes} entries"
            )
        if any(alpha < 0 for alpha in self.alpha_sweep):
            raise ValueError("alpha_sweep values must be non-negative")
        return self

    def with_seed(self, seed: int) -> "RunConfig":
        """Copy with `seed` propagated to training, MC sampling and the generator."""
        overrides = {
            "seed": seed,
            "train.seed": seed,
            "mc.base_seed": seed,
            "synth.seed": seed,
        }
        if self.teacher_train is not None:
            overrides["teacher_train.seed"] = seed
        return self.with_overrides(overrides)

    @property
    def teacher_schedule(self) -> TrainConfig:
        return self.teacher_train or self.train

    @classmethod
    def from_dict(cls, values: dict) -> "RunConfig":
        try:
            return cls.model_validate(values)
        except ValidationError as error:
            raise ConfigurationError(f"invalid run configuration: {error}") from error

    @classmethod
    def from_yaml(cls, path: Path) -> "RunConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigurationError(f"config file {path} does not exist")
        with path.open() as handle:
            values = yaml.safe_load(handle) or {}
        return cls.from_dict(restore_inf_values(values))

    def to_yaml(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w") as handle:
            yaml.safe_dump(self.to_plain_dict(), handle, sort_keys=False)
        return path

    def to_plain_dict(self) -> dict:
        return replace_inf_values(self.model_dump(mode="json"))

    def with_overrides(self, overrides: dict[str, Any]) -> "RunConfig":
        """Return a validated copy with dotted-key overrides (None is ignored)."""
        values = self.model_dump(mode="json")
        for dotted_key, value in overrides.items():
            if value is None:
                continue
            target = values
            *parents, leaf = dotted_key.split(".")
            for parent in parents:
                if target.get(parent) is None:
                    target[parent] = {}
                target = target[parent]
            target[leaf] = value
        return RunConfig.from_dict(values)


def resolve_run_config(
    config_path: Optional[Path] = None,
    seed: Optional[int] = None,
    alpha: Optional[float] = None,
    num_passes: Optional[int] = None,
    out_dir: Optional[Path] = None,
    extra: Optional[dict[str, Any]] = None,
) -> RunConfig:
    """Defaults < YAML file < explicit flags."""
    base = RunConfig.from_yaml(config_path) if config_path else RunConfig()
    if seed is not None:
        base = base.with_seed(seed)
    overrides: dict[str, Any] = {}
    if alpha is not None:
        overrides.update({"mc.alpha": alpha, "loss.alpha": alpha})
    if num_passes is not None:
        overrides["mc.num_passes"] = num_passes
    if out_dir is not None:
        overrides["paths.out_dir"] = str(out_dir)
    overrides.update(extra or {})
    return base.with_overrides(overrides)
