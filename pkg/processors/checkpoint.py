"""
Binary checkpoint codec

Layout:
    b"MARSCKPT" | version (1 byte) | header length (4 bytes, little-endian)
    | UTF-8 JSON header | float32 little-endian tensors in header order
    | SHA-256 of the payload (32 bytes)

The payload covered by the digest is everything before the digest itself.
"""
import hashlib
import json
import logging
import os
import struct
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from config.settings import CHECKPOINT_MAGIC, CHECKPOINT_VERSION
from core.params import ModelParams, params_from_arrays
from utils.errors import CheckpointCorruptionError, CheckpointError, CheckpointVersionError
from utils.helpers import canonical_json

PREFIX = struct.Struct("<8sBI")
DIGEST_SIZE = 32
STORED_DTYPE = np.dtype("<f4")


@dataclass
class Checkpoint:
    header: dict
    params: ModelParams

    @property
    def config(self) -> dict:
        return self.header["config"]

    @property
    def vocab_digest(self) -> str:
        return self.header["vocab_digest"]

    @property
    def catalog_digest(self) -> str:
        return self.header["catalog_digest"]


def _to_stored(params: ModelParams) -> Dict[str, np.ndarray]:
    return {name: np.ascontiguousarray(value, dtype=STORED_DTYPE) for name, value in params.tensors.items()}


def encode_checkpoint(params: ModelParams, config: dict, vocab_digest: str = "", catalog_digest: str = "",
                      stopwords_id: str = "", rng_state: Optional[dict] = None,
                      training_info: Optional[dict] = None) -> bytes:
    """Serialize parameters and metadata into checkpoint bytes"""
    stored = _to_stored(params)
    header = {
        "format_version": CHECKPOINT_VERSION,
        "config": config,
        "hyper": params.hyper_dict(),
        "order": list(stored),
        "shapes": {name: list(value.shape) for name, value in stored.items()},
        "dtype": "float32-le",
        "vocab_digest": vocab_digest,
        "catalog_digest": catalog_digest,
        "stopword_set_id": stopwords_id,
        "rng_state": rng_state or {},
        "training": training_info or {},
    }
    header_bytes = canonical_json(header).encode("utf-8")
    body = PREFIX.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, len(header_bytes)) + header_bytes
    body += b"".join(value.tobytes(order="C") for value in stored.values())
    return body + hashlib.sha256(body).digest()


def save_checkpoint(params: ModelParams, config: dict, path: str, vocab_digest: str = "",
                    catalog_digest: str = "", stopwords_id: str = "", rng_state: Optional[dict] = None,
                    training_info: Optional[dict] = None) -> str:
    """
    Write a checkpoint file

    Args:
        params: Parameters (stored as 32-bit reals)
        config: Config echo (TrainConfig.echo())
        path: Destination file
        vocab_digest: Digest of the vocabulary the model was trained with
        catalog_digest: Digest of the item catalog order
        stopwords_id: Stopword list id
        rng_state: Sampler state at the time of saving
        training_info: Epoch and validation summary

    Returns:
        Hex SHA-256 of the whole file
    """
    data = encode_checkpoint(params, config, vocab_digest, catalog_digest, stopwords_id, rng_state, training_info)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    tmp_path = f"{path}.tmp"
    with open(tmp_path, "wb") as f:
        f.write(data)
    os.replace(tmp_path, path)
    logging.info(f"Saved checkpoint to {path} ({len(data)} bytes)")
    return hashlib.sha256(data).hexdigest()


def _parse_prefix(prefix: bytes, path: str):
    if len(prefix) < PREFIX.size:
        raise CheckpointCorruptionError(f"{path} is truncated (no header)")
    magic, version, header_len = PREFIX.unpack(prefix[:PREFIX.size])
    if magic != CHECKPOINT_MAGIC:
        raise CheckpointCorruptionError(f"{path} is not a checkpoint (bad magic {magic!r})")
    if version != CHECKPOINT_VERSION:
        raise CheckpointVersionError(f"{path} has format version {version}; this build reads {CHECKPOINT_VERSION}")
    return header_len


def _parse_header(raw: bytes, path: str) -> dict:
    try:
        return json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointCorruptionError(f"{path} has an unreadable header: {e}") from e


def read_checkpoint_header(path: str) -> dict:
    """Read only the header (shapes, config echo, digests); the tensors are not read"""
    with open(path, "rb") as f:
        header_len = _parse_prefix(f.read(PREFIX.size), path)
        raw = f.read(header_len)
    if len(raw) != header_len:
        raise CheckpointCorruptionError(f"{path} is truncated inside the header")
    return _parse_header(raw, path)


def decode_checkpoint(data: bytes, path: str = "<bytes>") -> Checkpoint:
    """Parse checkpoint bytes, verifying the payload digest before building any tensor"""
    header_len = _parse_prefix(data, path)
    if len(data) < PREFIX.size + header_len + DIGEST_SIZE:
        raise CheckpointCorruptionError(f"{path} is truncated")
    body, digest = data[:-DIGEST_SIZE], data[-DIGEST_SIZE:]
    if hashlib.sha256(body).digest() != digest:
        raise CheckpointCorruptionError(f"{path} failed its payload digest check")

    header = _parse_header(body[PREFIX.size:PREFIX.size + header_len], path)
    offset = PREFIX.size + header_len
    arrays = {}
    try:
        order: List[str] = list(header["order"])
        shapes = {name: tuple(int(n) for n in header["shapes"][name]) for name in order}
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointCorruptionError(f"{path}: header has no usable tensor layout ({e!r})") from e
    for name in order:
        shape = shapes[name]
        count = int(np.prod(shape)) if shape else 1
        size = count * STORED_DTYPE.itemsize
        if offset + size > len(body):
            raise CheckpointCorruptionError(f"{path}: tensor '{name}' extends past the payload")
        arrays[name] = np.frombuffer(body, dtype=STORED_DTYPE, count=count, offset=offset).reshape(shape)
        offset += size
    if offset != len(body):
        raise CheckpointCorruptionError(f"{path}: {len(body) - offset} unexpected bytes after the tensors")
    try:
        params = params_from_arrays(header["hyper"], arrays, order)
    except (TypeError, KeyError) as e:
        raise CheckpointError(f"{path}: header does not describe a model ({e})") from e
    return Checkpoint(header=header, params=params)


def load_checkpoint(path: str) -> Checkpoint:
    """
    Read and verify a checkpoint file

    Args:
        path: Checkpoint written by save_checkpoint

    Returns:
        Checkpoint with float64 parameters (exactly the stored 32-bit values)
    """
    with open(path, "rb") as f:
        data = f.read()
    checkpoint = decode_checkpoint(data, path)
    logging.info(f"Loaded checkpoint {path} ({checkpoint.params.hyper.variant} variant)")
    return checkpoint
