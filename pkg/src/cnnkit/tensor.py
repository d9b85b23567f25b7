"""Dense 4-D float32 tensors and the shape arithmetic used by every layer.

Layout is batch-channel-height-width, row-major, so the flat offset of
element (n, c, y, x) is ((n*C + c)*H + y)*W + x.  Geometry is strict-fit:
window, padding and stride must tile the input exactly, and violations
raise ShapeError instead of silently cropping.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ShapeError(ValueError):
    """Raised when tensor geometry does not fit together."""


@dataclass(frozen=True)
class Shape4:
    n: int
    c: int
    h: int
    w: int

    def __post_init__(self):
        for name in ("n", "c", "h", "w"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 0:
                raise ShapeError(f"dimension {name} must be a non-negative int, got {v!r}")

    def count(self) -> int:
        return self.n * self.c * self.h * self.w

    def dims(self) -> tuple[int, int, int, int]:
        return (self.n, self.c, self.h, self.w)


class Tensor:
    """Immutable flat float32 buffer plus its Shape4.

    Arrays handed to the constructor are adopted and marked read-only;
    layer kernels share tensors across threads without copying.
    """

    __slots__ = ("shape", "data")

    def __init__(self, shape: Shape4, data):
        arr = np.ascontiguousarray(data, dtype=np.float32).reshape(-1)
        if arr.size != shape.count():
            raise ShapeError(
                f"data length {arr.size} does not match shape {shape.dims()} "
                f"(expected {shape.count()})"
            )
        if min(shape.dims()) < 1:
            raise ShapeError(f"tensor dimensions must all be >= 1, got {shape.dims()}")
        arr.flags.writeable = False
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "data", arr)

    def __setattr__(self, name, value):
        raise AttributeError("Tensor is immutable")

    @classmethod
    def from_array(cls, arr) -> "Tensor":
        a = np.asarray(arr, dtype=np.float32)
        if a.ndim != 4:
            raise ShapeError(f"expected a 4-D array, got ndim={a.ndim}")
        return cls(Shape4(*a.shape), a)

    def view4(self) -> np.ndarray:
        """Zero-copy (n, c, h, w) view of the flat buffer."""
        return self.data.reshape(self.shape.dims())

    def at(self, n: int, c: int, y: int, x: int) -> float:
        return tensor_at(self, n, c, y, x)

    def __eq__(self, other):
        return (
            isinstance(other, Tensor)
            and self.shape == other.shape
            and np.array_equal(self.data, other.data)
        )

    def __repr__(self):
        return f"Tensor(shape={self.shape.dims()})"


def tensor_at(t: Tensor, n: int, c: int, y: int, x: int) -> float:
    """Element at (n, c, y, x); raises IndexError when out of bounds."""
    s = t.shape
    for idx, bound, name in ((n, s.n, "n"), (c, s.c, "c"), (y, s.h, "y"), (x, s.w, "x")):
        if not 0 <= idx < bound:
            raise IndexError(f"index {name}={idx} out of bounds for dimension of size {bound}")
    return float(t.data[((n * s.c + c) * s.h + y) * s.w + x])


def _fit(extent: int, window: int, pad: int, stride: int, dim: str) -> int:
    span = extent + 2 * pad - window
    if span < 0:
        raise ShapeError(
            f"{dim}: window {window} exceeds padded extent {extent + 2 * pad}"
        )
    if span % stride != 0:
        raise ShapeError(
            f"{dim}: extent {extent} with pad {pad}, window {window}, stride {stride} "
            f"does not tile exactly (strict-fit)"
        )
    return span // stride + 1


def conv_output_shape(
    in_shape: Shape4, kernels: int, kh: int, kw: int, pad: int, stride: int
) -> Shape4:
    if stride < 1:
        raise ShapeError(f"stride must be >= 1, got {stride}")
    if pad < 0:
        raise ShapeError(f"pad must be >= 0, got {pad}")
    if kh < 1 or kw < 1:
        raise ShapeError(f"kernel must be >= 1x1, got {kh}x{kw}")
    oh = _fit(in_shape.h, kh, pad, stride, "height")
    ow = _fit(in_shape.w, kw, pad, stride, "width")
    return Shape4(in_shape.n, kernels, oh, ow)


def pool_output_shape(in_shape: Shape4, kh: int, kw: int, stride: int) -> Shape4:
    """Pooling geometry: strict-fit with pad 0, channel count preserved."""
    if stride < 1:
        raise ShapeError(f"stride must be >= 1, got {stride}")
    oh = _fit(in_shape.h, kh, 0, stride, "height")
    ow = _fit(in_shape.w, kw, 0, stride, "width")
    return Shape4(in_shape.n, in_shape.c, oh, ow)
