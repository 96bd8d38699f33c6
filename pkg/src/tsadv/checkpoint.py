"""Versioned binary checkpoints for forecasting models.

Layout: an 8-byte magic, a little-endian uint32 format version and uint32
header length, a UTF-8 JSON header (architecture descriptor plus parameter
names and shapes), then every parameter array as little-endian float64 in
header order.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .models import ForecastModel, build_model

MAGIC = b"TSADVCKP"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<8sII")


class CheckpointError(Exception):
    """Base class for unreadable checkpoints."""


class CheckpointVersionError(CheckpointError):
    def __init__(self, found, expected=FORMAT_VERSION):
        self.found, self.expected = found, expected
        super().__init__(f"checkpoint format version {found!r} is not supported (expected {expected})")


class CheckpointTruncatedError(CheckpointError):
    def __init__(self, needed: int, available: int):
        self.needed, self.available = needed, available
        super().__init__(f"checkpoint truncated: needs {needed} bytes, has {available}")


def to_bytes(model: ForecastModel) -> bytes:
    names, shapes, blobs = [], [], []
    for name, p in model.named_parameters():
        names.append(name)
        shapes.append(list(p.shape))
        blobs.append(np.ascontiguousarray(p.data, dtype="<f8").tobytes())
    header = json.dumps({"model": model.descriptor(), "params": names, "shapes": shapes},
                        sort_keys=True).encode()
    return _PREFIX.pack(MAGIC, FORMAT_VERSION, len(header)) + header + b"".join(blobs)


def from_bytes(raw: bytes) -> ForecastModel:
    if len(raw) < _PREFIX.size:
        raise CheckpointTruncatedError(_PREFIX.size, len(raw))
    magic, version, hlen = _PREFIX.unpack_from(raw)
    if magic != MAGIC:
        raise CheckpointVersionError(magic.decode("latin-1"))
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(version)
    start = _PREFIX.size + hlen
    if len(raw) < start:
        raise CheckpointTruncatedError(start, len(raw))
    try:
        header = json.loads(raw[_PREFIX.size:start])
        desc = dict(header["model"])
        names, shapes = header["params"], [tuple(s) for s in header["shapes"]]
    except (ValueError, KeyError, TypeError) as exc:
        raise CheckpointError(f"unreadable checkpoint header: {exc}") from exc
    needed = start + 8 * sum(int(np.prod(s)) for s in shapes)
    if len(raw) < needed:
        raise CheckpointTruncatedError(needed, len(raw))
    if len(raw) > needed:
        raise CheckpointError(f"{len(raw) - needed} trailing bytes after parameter data")

    model = build_model(desc.pop("kind"), desc.pop("features"), desc.pop("lookback"), **desc)
    expected = [(n, p.shape) for n, p in model.named_parameters()]
    if expected != list(zip(names, shapes)):
        raise CheckpointError("parameter names or shapes do not match the architecture descriptor")
    arrays, off = [], start
    for shape in shapes:
        count = int(np.prod(shape))
        arrays.append(np.frombuffer(raw, dtype="<f8", count=count, offset=off).reshape(shape))
        off += 8 * count
    model.set_arrays(arrays)
    return model


def save(model: ForecastModel, path) -> str:
    """Write ``model`` to ``path``; returns the checkpoint id (sha256 of its bytes)."""
    raw = to_bytes(model)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(raw)
    return hashlib.sha256(raw).hexdigest()


def load(path) -> ForecastModel:
    return from_bytes(Path(path).read_bytes())


def checkpoint_id(model: ForecastModel) -> str:
    return hashlib.sha256(to_bytes(model)).hexdigest()
