"""Versioned binary checkpoints.

Layout: magic, format version, length-prefixed JSON manifest (model class,
config, config hash, step count, tensor table), little-endian float32 blobs
in table order, and a trailing SHA-256 over everything before it.  Loading
is bit-exact with respect to what was saved, Adam state included.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .config import ModelConfig
from .linear import LinearConfig, LinearRegressor
from .network import RegressorModel

__all__ = ["CheckpointError", "save_checkpoint", "load_checkpoint"]

MAGIC = b"EMRC"
FORMAT_VERSION = 1

_MODEL_CLASSES = {
    "speech": (RegressorModel, ModelConfig),
    "linear": (LinearRegressor, LinearConfig),
}


class CheckpointError(RuntimeError):
    pass


def _tensor_table(model):
    table = []
    for kind, store in (("param", model.params), ("adam_m", model.adam_m),
                        ("adam_v", model.adam_v)):
        for name in sorted(store):
            table.append((kind, name, store[name]))
    return table


def save_checkpoint(model, path) -> None:
    path = Path(path)
    table = _tensor_table(model)
    manifest = {
        "format_version": FORMAT_VERSION,
        "model_class": model.model_class,
        "config": model.config.to_dict(),
        "config_hash": model.config.config_hash(),
        "step_count": model.step_count,
        "tensors": [
            {"kind": kind, "name": name, "shape": list(arr.shape)}
            for kind, name, arr in table
        ],
    }
    meta = json.dumps(manifest, sort_keys=True).encode()
    body = bytearray()
    body += MAGIC
    body += struct.pack("<I", FORMAT_VERSION)
    body += struct.pack("<Q", len(meta))
    body += meta
    for _, _, arr in table:
        body += np.ascontiguousarray(arr, dtype="<f4").tobytes()
    digest = hashlib.sha256(bytes(body)).digest()
    path.write_bytes(bytes(body) + digest)


def load_checkpoint(path, expected_config=None):
    """Rebuild a model from a checkpoint file.

    If `expected_config` is given, its hash must match the stored one.
    """
    raw = Path(path).read_bytes()
    if len(raw) < 4 + 4 + 8 + 32:
        raise CheckpointError("checkpoint file truncated")
    body, digest = raw[:-32], raw[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise CheckpointError("checkpoint checksum mismatch (corrupt or truncated)")
    if body[:4] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    (version,) = struct.unpack("<I", body[4:8])
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    (meta_len,) = struct.unpack("<Q", body[8:16])
    meta_end = 16 + meta_len
    manifest = json.loads(body[16:meta_end].decode())

    model_class = manifest["model_class"]
    if model_class not in _MODEL_CLASSES:
        raise CheckpointError(f"unknown model class {model_class!r}")
    cls, cfg_cls = _MODEL_CLASSES[model_class]
    config = cfg_cls.from_dict(manifest["config"])
    if config.config_hash() != manifest["config_hash"]:
        raise CheckpointError("stored config does not match its recorded hash")
    if expected_config is not None and expected_config.config_hash() != manifest["config_hash"]:
        raise CheckpointError(
            "checkpoint config hash does not match the expected configuration"
        )

    offset = meta_end
    stores = {"param": {}, "adam_m": {}, "adam_v": {}}
    for entry in manifest["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 4
        blob = body[offset : offset + nbytes]
        if len(blob) != nbytes:
            raise CheckpointError("checkpoint tensor data truncated")
        stores[entry["kind"]][entry["name"]] = np.frombuffer(blob, dtype="<f4").reshape(shape).copy()
        offset += nbytes
    if offset != len(body):
        raise CheckpointError("trailing bytes after tensor data")

    model = cls(config, stores["param"])
    model.adam_m = stores["adam_m"]
    model.adam_v = stores["adam_v"]
    model.step_count = int(manifest["step_count"])
    return model
