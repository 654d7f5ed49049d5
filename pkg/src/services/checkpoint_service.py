import hashlib
from pathlib import Path
from typing import Any, Optional

import torch
import yaml
from loguru import logger
from pydantic import ValidationError

from src.configs.env import Config
from src.exceptions.segmentation_exceptions import CheckpointError
from src.schemas.model_schema import ModelConfig
from src.segmentation.dense_unet import SegmentationModel, build_model
from src.utils.enums import ModelRole

CHECKPOINT_FORMAT = "ugssl-checkpoint/1"
BEST_CHECKPOINT = "best.pt"
LAST_CHECKPOINT = "last.pt"


class CheckpointService:
    """
    Single-file checkpoints: the ModelConfig as YAML text, the parameter and
    buffer arrays under their module names, a content fingerprint and, for
    training checkpoints, optimizer/scheduler/train-state payloads.
    """

    @staticmethod
    def fingerprint(model: SegmentationModel) -> str:
        digest = hashlib.sha1()
        for name, tensor in sorted(model.state_dict().items()):
            digest.update(name.encode())
            digest.update(tensor.detach().cpu().contiguous().numpy().tobytes())
        return digest.hexdigest()[:16]

    @staticmethod
    def save(
        path: Path,
        model: SegmentationModel,
        role: ModelRole,
        extra: Optional[dict[str, Any]] = None,
    ) -> str:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        checkpoint_id = f"{role}-{CheckpointService.fingerprint(model)}"
        payload = {
            "format": CHECKPOINT_FORMAT,
            "role": str(role),
            "checkpoint_id": checkpoint_id,
            "model_config": yaml.safe_dump(model.config.model_dump(), sort_keys=True),
            "state_dict": {
                name: tensor.detach().cpu().clone()
                for name, tensor in model.state_dict().items()
            },
        }
        payload.update(extra or {})
        torch.save(payload, path)
        logger.info(f"Saved {role} checkpoint {checkpoint_id} to {path}")
        return checkpoint_id

    @staticmethod
    def read(path: Path) -> dict[str, Any]:
        path = Path(path)
        if not path.is_file():
            raise CheckpointError(f"checkpoint {path} does not exist")
        try:
            payload = torch.load(path, map_location="cpu", weights_only=True)
        except Exception as error:
            raise CheckpointError(f"cannot read checkpoint {path}: {error}") from error
        if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
            raise CheckpointError(f"{path} is not a segmentation checkpoint")
        return payload

    @staticmethod
    def config_of(payload: dict[str, Any]) -> ModelConfig:
        try:
            return ModelConfig.model_validate(yaml.safe_load(payload["model_config"]))
        except (ValidationError, yaml.YAMLError) as error:
            raise CheckpointError(f"checkpoint carries an invalid config: {error}")

    @staticmethod
    def load(
        path: Path,
        expected_config: Optional[ModelConfig] = None,
        device: Optional[str] = None,
    ) -> tuple[SegmentationModel, dict[str, Any]]:
        """Rebuild the model stored at `path`; returns (model, payload)."""
        payload = CheckpointService.read(path)
        config = CheckpointService.config_of(payload)
        if expected_config is not None and config != expected_config:
            logger.error(
                f"Checkpoint config {config.model_dump()} differs from the run "
                f"config {expected_config.model_dump()}"
            )
            raise CheckpointError(
                f"checkpoint {path} was built with a different model configuration"
            )
        model = build_model(config)
        try:
            model.load_state_dict(payload["state_dict"])
        except RuntimeError as error:
            raise CheckpointError(
                f"parameters in {path} do not fit: {error}"
            ) from error
        model.to(device or Config.DEVICE)
        return model, payload
