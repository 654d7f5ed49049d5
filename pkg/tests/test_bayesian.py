import math

import numpy as np
import pytest
import torch

from src.exceptions.segmentation_exceptions import ConfigurationError
from src.schemas.inference_schema import McConfig
from src.segmentation.bayesian import confidence_map, entropy_map, mc_mean_prediction
from src.segmentation.dense_unet import build_model, forward
from src.services.soft_label_service import SoftLabelService
from src.utils.seeding import derive_seed


@pytest.fixture
def image():
    return np.random.default_rng(1).random((16, 16), dtype=np.float32)


def _pixel(*scores: float) -> torch.Tensor:
    return torch.tensor(scores, dtype=torch.float64).view(-1, 1, 1)


def test_entropy_of_uniform_pixel_is_log_c():
    assert entropy_map(_pixel(*[1 / 9] * 9)).item() == pytest.approx(
        math.log(9), abs=1e-9
    )


def test_entropy_of_one_hot_pixel_is_zero():
    assert entropy_map(_pixel(1, 0, 0, 0)).item() == 0.0


def test_entropy_of_even_split():
    assert entropy_map(_pixel(0.5, 0.5, 0, 0)).item() == pytest.approx(
        math.log(2), abs=1e-12
    )


def test_entropy_is_bounded_and_maximal_only_when_uniform():
    scores = torch.softmax(torch.randn(2, 5, 8, 8, dtype=torch.float64), dim=1)
    entropy = entropy_map(scores)

    assert entropy.shape == (2, 8, 8)
    assert entropy.min() >= 0
    assert entropy.max() < math.log(5) - 1e-9


def test_confidence_values():
    u = torch.tensor([0.0, math.log(9)], dtype=torch.float64)

    omega = confidence_map(u, alpha=2.0)

    assert omega[0].item() == 1.0
    assert omega[1].item() == pytest.approx(1 / 81, abs=1e-12)
    assert torch.equal(confidence_map(u, alpha=0.0), torch.ones_like(u))


def test_confidence_decreases_with_uncertainty():
    u = torch.linspace(0, math.log(4), 50, dtype=torch.float64)
    assert torch.all(torch.diff(confidence_map(u, alpha=1.5)) < 0)


def test_negative_alpha_is_rejected():
    with pytest.raises(ConfigurationError):
        confidence_map(torch.zeros(2, 2), alpha=-1.0)


def test_single_pass_equals_its_stochastic_forward(model, image):
    mc = McConfig(num_passes=1, base_seed=4)

    expected = forward(model, image, dropout_active=True, rng_seed=derive_seed(4, 0))
    assert torch.equal(mc_mean_prediction(model, image, mc), expected)


def test_mean_prediction_is_a_score_map(model, image):
    mean = mc_mean_prediction(model, image, McConfig(num_passes=5))
    assert (mean.sum(dim=1) - 1).abs().max() < 1e-5


def test_zero_dropout_uncertainty_is_entropy_of_deterministic_prediction(
    model_config, image
):
    teacher = build_model(model_config.model_copy(update={"dropout_rate": 0.0}))
    record = SoftLabelService.generate_soft_labels(
        teacher, [image], ["probe"], McConfig(num_passes=7), "teacher-test"
    )[0]

    expected = entropy_map(forward(teacher, image)[0])
    assert torch.equal(record.uncertainty, expected)
    assert torch.equal(record.soft_label, forward(teacher, image)[0])


def test_record_grids_share_the_image_shape(model, image):
    records = SoftLabelService.generate_soft_labels(
        model, [image, image], ["a", "b"], McConfig(num_passes=2), "teacher-test"
    )

    assert [record.source_image_id for record in records] == ["a", "b"]
    for record in records:
        assert record.soft_label.shape == (3, 16, 16)
        assert record.uncertainty.shape == record.confidence.shape == (16, 16)
        assert record.teacher_checkpoint_id == "teacher-test"


def test_mc_spread_shrinks_with_more_passes(model_config, image):
    model = build_model(model_config.model_copy(update={"dropout_rate": 0.5}))
    repeats = 40

    def spread(num_passes: int, offset: int) -> float:
        means = torch.stack(
            [
                mc_mean_prediction(
                    model,
                    image,
                    McConfig(num_passes=num_passes, base_seed=offset + repeat),
                )
                for repeat in range(repeats)
            ]
        )
        return means.std(dim=0).mean().item()

    assert spread(16, 1000) <= 0.6 * spread(4, 0)


def test_mean_uncertainty_probe(model, image):
    value = SoftLabelService.mean_uncertainty(model, [image], McConfig(num_passes=2))
    assert 0.0 <= value <= math.log(3)
