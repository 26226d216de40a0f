"""
Checkpoint codec
"""
import hashlib
import json

import numpy as np
import pytest

from config.settings import CHECKPOINT_MAGIC, CHECKPOINT_VERSION
from core.params import Hyper, init_params
from processors.checkpoint import (
    PREFIX, decode_checkpoint, encode_checkpoint, load_checkpoint, read_checkpoint_header, save_checkpoint,
)
from utils.errors import CheckpointCorruptionError, CheckpointVersionError


@pytest.fixture
def params():
    hyper = Hyper(embedding_dim=3, num_filters=2, window_size=2, latent_dim=4, vocab_size=9, num_items=5,
                  lambda_u=0.002, lambda_v=0.002)
    return init_params(hyper, seed=1)


def test_round_trip_is_byte_identical(params, tmp_path):
    path = tmp_path / "model.ckpt"
    save_checkpoint(params, {"seed": 1}, str(path), vocab_digest="v", catalog_digest="c")
    loaded = load_checkpoint(str(path))
    assert loaded.vocab_digest == "v" and loaded.catalog_digest == "c"
    assert loaded.params.order() == params.order()

    again = tmp_path / "again.ckpt"
    save_checkpoint(loaded.params, {"seed": 1}, str(again), vocab_digest="v", catalog_digest="c")
    assert path.read_bytes() == again.read_bytes()


def test_values_are_stored_as_32_bit(params):
    decoded = decode_checkpoint(encode_checkpoint(params, {}))
    for name, value in params.tensors.items():
        np.testing.assert_array_equal(decoded.params[name], value.astype(np.float32).astype(np.float64))


def test_truncated_file(params, tmp_path):
    path = tmp_path / "model.ckpt"
    save_checkpoint(params, {}, str(path))
    path.write_bytes(path.read_bytes()[:-10])
    with pytest.raises(CheckpointCorruptionError):
        load_checkpoint(str(path))


def test_flipped_byte_fails_digest(params):
    data = bytearray(encode_checkpoint(params, {}))
    data[-40] ^= 0xFF
    with pytest.raises(CheckpointCorruptionError):
        decode_checkpoint(bytes(data))


def test_bad_magic(params):
    data = encode_checkpoint(params, {})
    with pytest.raises(CheckpointCorruptionError):
        decode_checkpoint(b"NOTACKPT" + data[8:])


def test_unknown_version(params):
    data = bytearray(encode_checkpoint(params, {}))
    data[len(CHECKPOINT_MAGIC)] = 99
    with pytest.raises(CheckpointVersionError):
        decode_checkpoint(bytes(data))


def test_header_only_read(params, tmp_path):
    path = tmp_path / "model.ckpt"
    save_checkpoint(params, {"latent_dim": 4}, str(path), training_info={"best_epoch": 3})
    header = read_checkpoint_header(str(path))
    assert header["config"] == {"latent_dim": 4}
    assert header["training"]["best_epoch"] == 3
    assert header["shapes"]["user.kernels"] == [2, 3, 2]
    assert header["dtype"] == "float32-le"
    assert PREFIX.size == 13


@pytest.mark.parametrize("header", [{}, {"order": ["user.kernels"], "shapes": {}},
                                    {"order": ["user.kernels"], "shapes": {"user.kernels": ["two"]}}, []])
def test_header_without_tensor_layout(header):
    raw = json.dumps(header).encode("utf-8")
    body = PREFIX.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, len(raw)) + raw
    with pytest.raises(CheckpointCorruptionError):
        decode_checkpoint(body + hashlib.sha256(body).digest())
