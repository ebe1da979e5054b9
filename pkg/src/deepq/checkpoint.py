"""Binary checkpoint format for Q-network parameters and RMSProp state.

Layout, all little-endian:

    b"DQNC"                        magic
    u32                            format version
    11 x u32                       geometry (Geometry.as_ints order)
    f32[...] x 8                   parameters in PARAM_ORDER, row-major
    f32[...] x 8                   RMSProp mean squares, same order
    f64 x 3                        decay, epsilon, learning rate
"""
from __future__ import annotations

import math
import os
import struct
from pathlib import Path

import numpy as np

from .errors import CheckpointError, OutputError
from .nn import PARAM_ORDER, Geometry, QNetParams, RmsPropState

MAGIC = b"DQNC"
VERSION = 1
_GEOMETRY_FIELDS = 11


def encode_checkpoint(params: QNetParams, rms: RmsPropState) -> bytes:
    parts = [MAGIC, struct.pack("<I", VERSION),
             struct.pack(f"<{_GEOMETRY_FIELDS}I", *params.geometry.as_ints())]
    for source in (params.tensors, rms.mean_square):
        for name in PARAM_ORDER:
            parts.append(np.ascontiguousarray(source[name], dtype="<f4").tobytes())
    parts.append(struct.pack("<3d", rms.decay, rms.epsilon, rms.learning_rate))
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, field: str) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointError(field, f"truncated: need {n} bytes at offset {self.pos}, "
                                         f"file has {len(self.data)}")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk


def decode_checkpoint(data: bytes, expected_geometry: Geometry | None = None):
    r = _Reader(data)
    if r.take(4, "magic") != MAGIC:
        raise CheckpointError("magic", "not a DQNC checkpoint")
    (version,) = struct.unpack("<I", r.take(4, "version"))
    if version != VERSION:
        raise CheckpointError("version", f"unsupported version {version}, expected {VERSION}")
    ints = struct.unpack(f"<{_GEOMETRY_FIELDS}I", r.take(4 * _GEOMETRY_FIELDS, "geometry"))
    geometry = Geometry.from_ints(ints)
    try:
        geometry.validate()
    except Exception as exc:
        raise CheckpointError("geometry", f"invalid layer geometry: {exc}") from None
    if expected_geometry is not None and geometry != expected_geometry:
        raise CheckpointError("geometry", f"checkpoint has {geometry.as_ints()}, "
                                          f"expected {expected_geometry.as_ints()}")
    shapes = geometry.param_shapes()
    tensors, mean_square = {}, {}
    for label, target in (("param", tensors), ("mean_square", mean_square)):
        for name in PARAM_ORDER:
            shape = shapes[name]
            raw = r.take(4 * math.prod(shape), f"{label}:{name}")
            target[name] = np.frombuffer(raw, dtype="<f4").astype(np.float32).reshape(shape)
    decay, eps, lr = struct.unpack("<3d", r.take(24, "rmsprop"))
    if r.pos != len(data):
        raise CheckpointError("trailer", f"{len(data) - r.pos} unexpected bytes after the end")
    return QNetParams(geometry, tensors), RmsPropState(mean_square, decay, eps, lr)


def save_checkpoint(params: QNetParams, rms: RmsPropState, path) -> Path:
    path = Path(path)
    data = encode_checkpoint(params, rms)
    tmp = path.with_name(path.name + ".tmp")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp.write_bytes(data)
        os.replace(tmp, path)
    except OSError as exc:
        raise OutputError(f"cannot write checkpoint {path}: {exc.strerror or exc}") from exc
    return path


def load_checkpoint(path, expected_geometry: Geometry | None = None):
    """Returns ``(params, rms_state)``; raises CheckpointError on any mismatch."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise OutputError(f"cannot read checkpoint {path}: {exc.strerror or exc}") from exc
    return decode_checkpoint(data, expected_geometry)
