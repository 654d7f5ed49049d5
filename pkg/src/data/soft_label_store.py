"""
Soft-label container, one file (`<id>.slr`) per unlabeled image.

Byte layout, all integers little-endian:

    offset 0    4 bytes   magic b"UGSL"
    offset 4    uint16    format version (1)
    offset 6    uint32    header length n in bytes
    offset 10   n bytes   UTF-8 JSON header
    offset 10+n           payload: the chunks back to back

The header holds the provenance (`source_image_id`, `teacher_checkpoint_id`,
`mc_config`) and a `chunks` list; every chunk is
`{"name", "dtype", "shape", "offset", "nbytes"}` with `offset` counted from
the start of the payload. The chunks are `soft_label` (C, H, W),
`uncertainty` (H, W) and `confidence` (H, W), stored as C-ordered `<f4`
arrays, so a save/load round trip is bit-exact.
"""

import json
import struct
from pathlib import Path

import numpy as np
import torch
from pydantic import ValidationError

from src.exceptions.segmentation_exceptions import ShapeError, SoftLabelStoreError
from src.schemas.inference_schema import McConfig, SoftLabelRecord

MAGIC = b"UGSL"
VERSION = 1
PREAMBLE = struct.Struct("<4sHI")
CHUNK_DTYPE = "<f4"
CHUNK_NAMES = ("soft_label", "uncertainty", "confidence")
SUFFIX = ".slr"


def encode_record(record: SoftLabelRecord) -> bytes:
    chunks, payload, offset = [], [], 0
    for name in CHUNK_NAMES:
        array = np.ascontiguousarray(
            getattr(record, name).detach().cpu().numpy(), dtype=CHUNK_DTYPE
        )
        data = array.tobytes(order="C")
        chunks.append(
            {
                "name": name,
                "dtype": CHUNK_DTYPE,
                "shape": list(array.shape),
                "offset": offset,
                "nbytes": len(data),
            }
        )
        payload.append(data)
        offset += len(data)
    header = json.dumps(
        {
            "source_image_id": record.source_image_id,
            "teacher_checkpoint_id": record.teacher_checkpoint_id,
            "mc_config": record.mc_config.model_dump(),
            "chunks": chunks,
        },
        sort_keys=True,
    ).encode("utf-8")
    return PREAMBLE.pack(MAGIC, VERSION, len(header)) + header + b"".join(payload)


def _read_chunk(payload: bytes, chunk: dict) -> torch.Tensor:
    try:
        shape = tuple(int(size) for size in chunk["shape"])
        offset, nbytes = int(chunk["offset"]), int(chunk["nbytes"])
        dtype = chunk["dtype"]
    except (KeyError, TypeError, ValueError) as error:
        raise SoftLabelStoreError(f"malformed chunk entry {chunk!r}") from error
    if dtype != CHUNK_DTYPE:
        raise SoftLabelStoreError(f"chunk {chunk.get('name')} has dtype {dtype}")
    if nbytes != int(np.prod(shape, dtype=np.int64)) * 4:
        raise SoftLabelStoreError(
            f"chunk {chunk.get('name')} size {nbytes} does not match shape {shape}"
        )
    if offset < 0 or offset + nbytes > len(payload):
        raise SoftLabelStoreError(f"chunk {chunk.get('name')} runs past the file end")
    array = np.frombuffer(payload, dtype=CHUNK_DTYPE, count=nbytes // 4, offset=offset)
    return torch.from_numpy(array.reshape(shape).astype(np.float32))


def decode_record(data: bytes) -> SoftLabelRecord:
    if len(data) < PREAMBLE.size:
        raise SoftLabelStoreError("file is shorter than the container preamble")
    magic, version, header_length = PREAMBLE.unpack_from(data)
    if magic != MAGIC:
        raise SoftLabelStoreError(f"bad magic {magic!r}; not a soft-label file")
    if version != VERSION:
        raise SoftLabelStoreError(f"unsupported container version {version}")
    header_end = PREAMBLE.size + header_length
    if header_end > len(data):
        raise SoftLabelStoreError("header runs past the file end")
    try:
        header = json.loads(data[PREAMBLE.size : header_end].decode("utf-8"))
        chunks = {chunk["name"]: chunk for chunk in header["chunks"]}
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError) as error:
        raise SoftLabelStoreError(f"unreadable header: {error}") from error
    missing = [name for name in CHUNK_NAMES if name not in chunks]
    if missing:
        raise SoftLabelStoreError(f"missing chunks {missing}")

    payload = data[header_end:]
    arrays = {name: _read_chunk(payload, chunks[name]) for name in CHUNK_NAMES}
    try:
        return SoftLabelRecord(
            **arrays,
            source_image_id=header["source_image_id"],
            teacher_checkpoint_id=header["teacher_checkpoint_id"],
            mc_config=McConfig.model_validate(header["mc_config"]),
        )
    except (KeyError, ValidationError, ShapeError) as error:
        raise SoftLabelStoreError(f"inconsistent record: {error}") from error


def save_record(directory: Path, record: SoftLabelRecord) -> Path:
    path = Path(directory) / f"{record.source_image_id}{SUFFIX}"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_record(record))
    return path


def load_record(path: Path) -> SoftLabelRecord:
    path = Path(path)
    if not path.is_file():
        raise SoftLabelStoreError(f"soft-label file {path} does not exist")
    return decode_record(path.read_bytes())
