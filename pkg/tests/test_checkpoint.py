import pytest
import torch

from src.exceptions.segmentation_exceptions import CheckpointError
from src.services.checkpoint_service import CheckpointService
from src.services.training_service import TrainingService
from src.utils.enums import ModelRole


def test_roundtrip_is_bit_exact(tmp_path, model, striped_dataset):
    with torch.no_grad():
        for parameter in model.parameters():
            parameter.add_(0.01)
    path = tmp_path / "model.pt"

    checkpoint_id = CheckpointService.save(path, model, ModelRole.STUDENT)
    loaded, payload = CheckpointService.load(path, model.config)

    assert checkpoint_id == f"student-{CheckpointService.fingerprint(model)}"
    assert payload["checkpoint_id"] == checkpoint_id
    assert loaded.config == model.config
    original, restored = model.state_dict(), loaded.state_dict()
    assert all(torch.equal(original[name], restored[name]) for name in original)
    assert TrainingService.validation_loss(
        loaded, striped_dataset
    ) == TrainingService.validation_loss(model, striped_dataset)


def test_config_mismatch_is_rejected(tmp_path, model):
    path = tmp_path / "model.pt"
    CheckpointService.save(path, model, ModelRole.TEACHER)

    other = model.config.model_copy(update={"filters_per_unit": 3})
    with pytest.raises(CheckpointError):
        CheckpointService.load(path, other)


def test_unreadable_checkpoints(tmp_path):
    with pytest.raises(CheckpointError):
        CheckpointService.load(tmp_path / "missing.pt")

    garbage = tmp_path / "garbage.pt"
    garbage.write_bytes(b"not a checkpoint")
    with pytest.raises(CheckpointError):
        CheckpointService.load(garbage)

    foreign = tmp_path / "foreign.pt"
    torch.save({"weights": torch.zeros(2)}, foreign)
    with pytest.raises(CheckpointError):
        CheckpointService.load(foreign)
