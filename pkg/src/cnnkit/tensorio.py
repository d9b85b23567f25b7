"""Tensor file format used by the CLI: 16-byte header of four little-endian
uint32 (n, c, h, w) followed by n*c*h*w little-endian float32 values."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .tensor import Shape4, Tensor

HEADER = struct.Struct("<4I")


class TensorFileError(ValueError):
    pass


def write_tensor(path, t: Tensor) -> None:
    with open(path, "wb") as f:
        f.write(HEADER.pack(*t.shape.dims()))
        f.write(np.ascontiguousarray(t.data, dtype="<f4").tobytes())


def read_tensor(path) -> Tensor:
    raw = Path(path).read_bytes()
    if len(raw) < HEADER.size:
        raise TensorFileError(f"{path}: too short for a tensor header")
    dims = HEADER.unpack_from(raw)
    shape = Shape4(*(int(d) for d in dims))
    payload = raw[HEADER.size :]
    if len(payload) != shape.count() * 4:
        raise TensorFileError(
            f"{path}: expected {shape.count() * 4} payload bytes for shape {shape.dims()}, "
            f"got {len(payload)}"
        )
    data = np.frombuffer(payload, dtype="<f4").astype(np.float32, copy=False)
    return Tensor(shape, data)
