import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cnnkit.msgpackio import (
    MsgpackError,
    pack_array_header,
    pack_float32_array,
    pack_map_header,
    pack_str,
    pack_uint,
    unpack,
)


def test_known_encodings():
    out = bytearray()
    pack_map_header(1, out)
    pack_str("shape", out)
    pack_array_header(2, out)
    pack_uint(3, out)
    pack_uint(300, out)
    # fixmap(1), fixstr(5) "shape", fixarray(2), fixint 3, uint16 300
    assert bytes(out) == b"\x81\xa5shape\x92\x03\xcd\x01\x2c"


def test_float32_array_uses_0xca():
    out = bytearray()
    pack_float32_array(np.array([1.5], dtype=np.float32), out)
    assert bytes(out) == b"\x91\xca" + struct.pack(">f", 1.5)


def test_unpack_round_trip_mixed():
    out = bytearray()
    pack_map_header(2, out)
    pack_str("a", out)
    pack_uint(7, out)
    pack_str("b", out)
    pack_float32_array(np.array([0.25, -2.0, 1e-30], dtype=np.float32), out)
    got = unpack(bytes(out))
    assert got["a"] == 7
    np.testing.assert_array_equal(np.asarray(got["b"], dtype=np.float32),
                                  np.array([0.25, -2.0, 1e-30], dtype=np.float32))


def test_truncated_payload():
    out = bytearray()
    pack_float32_array(np.arange(8, dtype=np.float32), out)
    with pytest.raises(MsgpackError, match="truncated"):
        unpack(bytes(out[:-3]))


def test_trailing_garbage():
    out = bytearray()
    pack_uint(1, out)
    with pytest.raises(MsgpackError, match="trailing"):
        unpack(bytes(out) + b"\x00")


def test_foreign_encodings_accepted():
    # str8 / array16 / uint32 / float64: legal alternatives another encoder
    # might pick for the same logical payload
    buf = b"\x81" + b"\xd9\x05shape" + b"\xdc\x00\x02" + b"\xce\x00\x00\x00\x05" + b"\xcb" + struct.pack(">d", 2.5)
    got = unpack(buf)
    assert got == {"shape": [5, 2.5]}


floats32 = st.lists(
    st.floats(-1e6, 1e6, width=32, allow_nan=False), min_size=0, max_size=64
)


@given(floats32)
def test_float_array_round_trip_bitwise(values):
    arr = np.array(values, dtype=np.float32)
    out = bytearray()
    pack_float32_array(arr, out)
    back = np.asarray(unpack(bytes(out)), dtype=np.float32)
    assert back.tobytes() == arr.tobytes()


@given(st.integers(0, 2**64 - 1))
def test_uint_round_trip(n):
    out = bytearray()
    pack_uint(n, out)
    assert unpack(bytes(out)) == n
