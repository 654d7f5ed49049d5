import numpy as np
import pytest
import torch

from src.exceptions.segmentation_exceptions import ConfigurationError, ShapeError
from src.schemas.model_schema import ModelConfig
from src.segmentation.dense_unet import as_image_batch, build_model, forward
from src.segmentation.spatial_dropout import DropoutContext, SpatialDropout


@pytest.fixture
def image():
    return np.random.default_rng(0).random((16, 16), dtype=np.float32)


def test_default_blocks_emit_32_feature_maps():
    model = build_model(ModelConfig(num_classes=9))

    blocks = [*model.encoder, model.bottleneck, *model.decoder]
    assert len(model.encoder) == len(model.decoder) == 3
    assert all(block.out_channels == 32 for block in blocks)
    assert model.head.out_channels == 9


def test_minimal_model(image):
    config = ModelConfig(
        num_classes=2,
        units_per_block=1,
        filters_per_unit=1,
        num_encoder_blocks=1,
        dropout_rate=0.0,
    )
    scores = forward(build_model(config), image)

    assert scores.shape == (1, 2, 16, 16)
    assert torch.allclose(scores.sum(dim=1), torch.ones(1, 16, 16), atol=1e-5)


def test_single_class_is_rejected():
    with pytest.raises(ConfigurationError):
        build_model({"num_classes": 1})


def test_scores_are_normalized(model):
    batch = torch.rand(2, 1, 16, 32)
    scores = forward(model, batch, dropout_active=True, rng_seed=3)

    assert scores.shape == (2, 3, 16, 32)
    assert (scores.sum(dim=1) - 1).abs().max() < 1e-5
    assert scores.min() >= 0


def test_forward_without_dropout_is_deterministic(model, image):
    assert torch.equal(forward(model, image), forward(model, image))


def test_seeded_dropout_is_deterministic(model, image):
    first = forward(model, image, dropout_active=True, rng_seed=11)
    again = forward(model, image, dropout_active=True, rng_seed=11)
    other = forward(model, image, dropout_active=True, rng_seed=12)

    assert torch.equal(first, again)
    assert not torch.equal(first, other)


def test_zero_rate_dropout_is_identity(model_config, image):
    model = build_model(model_config.model_copy(update={"dropout_rate": 0.0}))

    deterministic = forward(model, image)
    for seed in range(3):
        assert torch.equal(
            forward(model, image, dropout_active=True, rng_seed=seed), deterministic
        )


def test_spatial_dropout_drops_whole_feature_maps():
    layer = SpatialDropout(0.5)
    x = torch.ones(2, 16, 4, 4)

    out = layer(x, DropoutContext.seeded(0))

    per_map = out.flatten(start_dim=2)
    dropped = (per_map == 0).all(dim=2)
    kept = (per_map == 2.0).all(dim=2)
    assert torch.all(dropped | kept)
    assert dropped.any() and kept.any()


def test_inactive_dropout_passes_input_through():
    x = torch.rand(1, 4, 4, 4)
    assert torch.equal(SpatialDropout(0.5)(x), x)


def test_dropout_rate_must_be_below_one():
    with pytest.raises(ConfigurationError):
        SpatialDropout(1.0)


def test_spatial_size_must_be_divisible(model):
    with pytest.raises(ShapeError):
        forward(model, np.zeros((10, 16), dtype=np.float32))


def test_channel_count_is_checked(model_config):
    with pytest.raises(ShapeError):
        as_image_batch(torch.zeros(2, 16, 16), model_config)


def test_initialization_is_seeded(model_config):
    first = build_model(model_config, seed=5).state_dict()
    second = build_model(model_config, seed=5).state_dict()
    third = build_model(model_config, seed=6).state_dict()

    assert all(torch.equal(first[name], second[name]) for name in first)
    assert not all(torch.equal(first[name], third[name]) for name in first)
