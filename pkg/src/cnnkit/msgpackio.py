"""Minimal MessagePack codec for the parameter-file schema.

Only the subset the parameter files need is implemented: maps, strings,
unsigned/signed integers, arrays, float32 and float64.  The encoder always
emits the smallest canonical encoding and packs floats as float32 (0xca),
which is the on-disk contract shared with the model converter.  The decoder
accepts any standard encoding of those types so files written by other
MessagePack implementations load fine.
"""

from __future__ import annotations

import struct

import numpy as np


class MsgpackError(ValueError):
    """Malformed or truncated MessagePack payload."""


def pack_uint(n: int, out: bytearray) -> None:
    if n < 0:
        raise MsgpackError(f"expected unsigned integer, got {n}")
    if n < 0x80:
        out.append(n)
    elif n < 0x100:
        out += struct.pack(">BB", 0xCC, n)
    elif n < 0x10000:
        out += struct.pack(">BH", 0xCD, n)
    elif n < 0x100000000:
        out += struct.pack(">BI", 0xCE, n)
    else:
        out += struct.pack(">BQ", 0xCF, n)


def pack_str(s: str, out: bytearray) -> None:
    b = s.encode("utf-8")
    n = len(b)
    if n < 32:
        out.append(0xA0 | n)
    elif n < 0x100:
        out += struct.pack(">BB", 0xD9, n)
    elif n < 0x10000:
        out += struct.pack(">BH", 0xDA, n)
    else:
        out += struct.pack(">BI", 0xDB, n)
    out += b


def pack_array_header(n: int, out: bytearray) -> None:
    if n < 16:
        out.append(0x90 | n)
    elif n < 0x10000:
        out += struct.pack(">BH", 0xDC, n)
    else:
        out += struct.pack(">BI", 0xDD, n)


def pack_map_header(n: int, out: bytearray) -> None:
    if n < 16:
        out.append(0x80 | n)
    elif n < 0x10000:
        out += struct.pack(">BH", 0xDE, n)
    else:
        out += struct.pack(">BI", 0xDF, n)


def pack_float32_array(values: np.ndarray, out: bytearray) -> None:
    """Array of float32 (0xca) elements, bulk-encoded."""
    flat = np.ascontiguousarray(values, dtype=np.float32).reshape(-1)
    pack_array_header(flat.size, out)
    buf = np.empty((flat.size, 5), dtype=np.uint8)
    buf[:, 0] = 0xCA
    buf[:, 1:] = flat.astype(">f4").view(np.uint8).reshape(-1, 4)
    out += buf.tobytes()


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise MsgpackError(
                f"truncated payload: wanted {n} bytes at offset {self.pos}, "
                f"have {len(self.data) - self.pos}"
            )
        b = self.data[self.pos : self.pos + n]
        self.pos += n
        return b

    def u(self, fmt: str) -> int:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))[0]

    def decode(self):
        tag = self.take(1)[0]
        if tag < 0x80:  # positive fixint
            return tag
        if tag >= 0xE0:  # negative fixint
            return tag - 0x100
        if 0x80 <= tag < 0x90:
            return self._map(tag & 0x0F)
        if 0x90 <= tag < 0xA0:
            return self._array(tag & 0x0F)
        if 0xA0 <= tag < 0xC0:
            return self.take(tag & 0x1F).decode("utf-8")
        handlers = {
            0xC0: lambda: None,
            0xC2: lambda: False,
            0xC3: lambda: True,
            0xCA: lambda: self.u(">f"),
            0xCB: lambda: self.u(">d"),
            0xCC: lambda: self.u(">B"),
            0xCD: lambda: self.u(">H"),
            0xCE: lambda: self.u(">I"),
            0xCF: lambda: self.u(">Q"),
            0xD0: lambda: self.u(">b"),
            0xD1: lambda: self.u(">h"),
            0xD2: lambda: self.u(">i"),
            0xD3: lambda: self.u(">q"),
            0xD9: lambda: self.take(self.u(">B")).decode("utf-8"),
            0xDA: lambda: self.take(self.u(">H")).decode("utf-8"),
            0xDB: lambda: self.take(self.u(">I")).decode("utf-8"),
            0xDC: lambda: self._array(self.u(">H")),
            0xDD: lambda: self._array(self.u(">I")),
            0xDE: lambda: self._map(self.u(">H")),
            0xDF: lambda: self._map(self.u(">I")),
        }
        if tag not in handlers:
            raise MsgpackError(f"unsupported MessagePack tag 0x{tag:02x} at offset {self.pos - 1}")
        return handlers[tag]()

    def _array(self, n: int):
        # Fast path for the weight/bias payloads: a run of n float32 elements
        # is n repetitions of 0xca + 4 bytes.
        if n > 16 and self.pos + 5 * n <= len(self.data):
            block = np.frombuffer(self.data, dtype=np.uint8, count=5 * n, offset=self.pos)
            block = block.reshape(n, 5)
            if (block[:, 0] == 0xCA).all():
                self.pos += 5 * n
                return np.ascontiguousarray(block[:, 1:]).view(">f4").reshape(-1).astype(np.float32)
        return [self.decode() for _ in range(n)]

    def _map(self, n: int):
        out = {}
        for _ in range(n):
            key = self.decode()
            out[key] = self.decode()
        return out


def unpack(data: bytes):
    """Decode a single MessagePack object; trailing bytes are an error."""
    r = _Reader(data)
    obj = r.decode()
    if r.pos != len(data):
        raise MsgpackError(f"{len(data) - r.pos} trailing bytes after payload")
    return obj


def unpack_prefix(data: bytes):
    """Decode one object from the front of `data`, ignoring what follows."""
    r = _Reader(data)
    return r.decode(), r.pos
