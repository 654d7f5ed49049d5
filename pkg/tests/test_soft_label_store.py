import json

import pytest
import torch

from src.data.soft_label_store import (
    MAGIC,
    PREAMBLE,
    decode_record,
    encode_record,
    load_record,
    save_record,
)
from src.exceptions.segmentation_exceptions import ShapeError, SoftLabelStoreError
from src.schemas.inference_schema import McConfig, SoftLabelRecord
from src.segmentation.bayesian import confidence_map, entropy_map
from src.services.soft_label_service import SoftLabelService


@pytest.fixture
def record():
    generator = torch.Generator().manual_seed(0)
    soft = torch.softmax(torch.randn(4, 6, 5, generator=generator), dim=0)
    uncertainty = entropy_map(soft)
    return SoftLabelRecord(
        soft_label=soft,
        uncertainty=uncertainty,
        confidence=confidence_map(uncertainty, 2.0),
        source_image_id="unlabeled_00003",
        teacher_checkpoint_id="teacher-0123456789abcdef",
        mc_config=McConfig(num_passes=10, alpha=2.0, base_seed=3),
    )


def test_roundtrip_is_bit_exact(tmp_path, record):
    path = save_record(tmp_path, record)
    loaded = load_record(path)

    assert path.name == "unlabeled_00003.slr"
    for name in ("soft_label", "uncertainty", "confidence"):
        original, restored = getattr(record, name), getattr(loaded, name)
        assert restored.dtype == torch.float32
        assert original.numpy().tobytes() == restored.numpy().tobytes()
    assert loaded.source_image_id == record.source_image_id
    assert loaded.teacher_checkpoint_id == record.teacher_checkpoint_id
    assert loaded.mc_config == record.mc_config


def test_header_documents_the_chunks(record):
    data = encode_record(record)
    magic, version, length = PREAMBLE.unpack_from(data)
    header = json.loads(data[PREAMBLE.size : PREAMBLE.size + length])

    assert (magic, version) == (MAGIC, 1)
    chunks = {chunk["name"]: chunk for chunk in header["chunks"]}
    assert chunks["soft_label"]["shape"] == [4, 6, 5]
    assert chunks["uncertainty"]["offset"] == 4 * 6 * 5 * 4
    assert len(data) == PREAMBLE.size + length + sum(
        chunk["nbytes"] for chunk in chunks.values()
    )


@pytest.mark.parametrize(
    "corrupt",
    [
        lambda data: b"XXXX" + data[4:],
        lambda data: data[:8],
        lambda data: data[:-4],
        lambda data: data[:10] + b"#" + data[11:],
    ],
    ids=["magic", "preamble", "payload", "header"],
)
def test_corrupt_files_are_rejected(record, corrupt):
    with pytest.raises(SoftLabelStoreError):
        decode_record(corrupt(encode_record(record)))


def test_missing_file(tmp_path):
    with pytest.raises(SoftLabelStoreError):
        load_record(tmp_path / "absent.slr")


def test_misaligned_grids_are_rejected(record):
    with pytest.raises(ShapeError):
        SoftLabelRecord(
            soft_label=record.soft_label,
            uncertainty=torch.zeros(5, 6),
            confidence=record.confidence,
            source_image_id="x",
            teacher_checkpoint_id="teacher-x",
            mc_config=McConfig(),
        )


def test_precomputed_store_reloads(tmp_path, model, experiment_data):
    mc = McConfig(num_passes=2)
    cache = SoftLabelService.precompute(
        model, experiment_data.unlabeled, mc, "teacher-test", tmp_path
    )

    stored = SoftLabelService.load_store(tmp_path)
    assert sorted(stored) == sorted(cache) == sorted(experiment_data.unlabeled.ids)
    for image_id, record in cache.items():
        assert torch.equal(stored[image_id].soft_label, record.soft_label)


def test_precompute_reuses_matching_stored_records(
    tmp_path, mocker, model, experiment_data
):
    mc = McConfig(num_passes=2)
    unlabeled = experiment_data.unlabeled
    first = SoftLabelService.precompute(model, unlabeled, mc, "teacher-test", tmp_path)
    generate = mocker.spy(SoftLabelService, "generate_soft_labels")

    again = SoftLabelService.precompute(model, unlabeled, mc, "teacher-test", tmp_path)

    assert generate.call_count == 0
    assert sorted(again) == sorted(first)
    for image_id, record in first.items():
        assert torch.equal(again[image_id].confidence, record.confidence)

    SoftLabelService.precompute(model, unlabeled, mc, "teacher-other", tmp_path)
    assert generate.call_count == len(unlabeled)
    SoftLabelService.precompute(
        model, unlabeled, McConfig(num_passes=3), "teacher-other", tmp_path
    )
    assert generate.call_count == 2 * len(unlabeled)
