"""Layer parameter files and the RAM-budgeted residency plan.

Each conv/fc layer stores its trained weights in one MessagePack file
(`model_param_<layer_name>.msg`): a top-level map with keys "shape"
(array of 4 unsigned ints), "weight" (float32 array, length = product of
shape) and "bias" (float32 array, length = shape[0]).

The cache plan decides which layers keep their parameters resident in
RAM across inference calls: layers are visited in descending parameter
size, and each is added iff it still fits in the remaining budget, so as
many layers as possible end up resident.  Non-resident layers are
re-read from storage on every compute call.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .msgpackio import (
    MsgpackError,
    pack_float32_array,
    pack_map_header,
    pack_str,
    pack_uint,
    pack_array_header,
    unpack,
    unpack_prefix,
)
from .tensor import Shape4, Tensor

PARAM_FILE_TEMPLATE = "model_param_{name}.msg"


class ParamFileError(ValueError):
    """Unreadable, malformed or inconsistent parameter file."""


@dataclass
class LayerParams:
    weight: Tensor  # conv: (kernels, in_channels/group, kh, kw); fc: (out, in, 1, 1)
    bias: np.ndarray  # float32, length = weight.shape.n

    def __post_init__(self):
        self.bias = np.ascontiguousarray(self.bias, dtype=np.float32).reshape(-1)
        if self.bias.size != self.weight.shape.n:
            raise ParamFileError(
                f"bias length {self.bias.size} != weight leading dimension {self.weight.shape.n}"
            )
        self.bias.flags.writeable = False

    def nbytes(self) -> int:
        return (self.weight.shape.count() + self.bias.size) * 4

    def __eq__(self, other):
        return (
            isinstance(other, LayerParams)
            and self.weight == other.weight
            and np.array_equal(self.bias, other.bias)
        )


@dataclass(frozen=True)
class CachePlan:
    resident: frozenset[str]
    resident_bytes: int


def encode_layer_params(params: LayerParams) -> bytes:
    out = bytearray()
    pack_map_header(3, out)
    pack_str("shape", out)
    pack_array_header(4, out)
    for d in params.weight.shape.dims():
        pack_uint(d, out)
    pack_str("weight", out)
    pack_float32_array(params.weight.data, out)
    pack_str("bias", out)
    pack_float32_array(params.bias, out)
    return bytes(out)


def write_layer_params(path, params: LayerParams) -> None:
    Path(path).write_bytes(encode_layer_params(params))


def _as_shape(obj, path) -> Shape4:
    if not isinstance(obj, (list, np.ndarray)) or len(obj) != 4:
        raise ParamFileError(f"{path}: 'shape' must be an array of 4 unsigned ints")
    dims = []
    for d in obj:
        if isinstance(d, float):
            d = int(d)
        if not isinstance(d, (int, np.integer)) or d < 0:
            raise ParamFileError(f"{path}: 'shape' must be an array of 4 unsigned ints")
        dims.append(int(d))
    return Shape4(*dims)


def load_layer_params(path, expected: tuple[int, int, int, int] | None = None) -> LayerParams:
    """Decode one parameter file, checking shape, lengths and finiteness."""
    try:
        raw = Path(path).read_bytes()
    except OSError as e:
        raise ParamFileError(f"{path}: {e}") from None
    try:
        obj = unpack(raw)
    except MsgpackError as e:
        raise ParamFileError(f"{path}: {e}") from None
    if not isinstance(obj, dict) or set(obj) != {"shape", "weight", "bias"}:
        raise ParamFileError(
            f"{path}: expected a map with keys shape/weight/bias, got "
            f"{sorted(obj) if isinstance(obj, dict) else type(obj).__name__}"
        )
    shape = _as_shape(obj["shape"], path)
    if expected is not None and shape.dims() != tuple(expected):
        raise ParamFileError(
            f"{path}: weight shape {shape.dims()} does not match expected {tuple(expected)}"
        )
    weight = np.asarray(obj["weight"], dtype=np.float32).reshape(-1)
    if weight.size != shape.count():
        raise ParamFileError(
            f"{path}: weight has {weight.size} values, shape {shape.dims()} expects {shape.count()}"
        )
    bias = np.asarray(obj["bias"], dtype=np.float32).reshape(-1)
    if bias.size != shape.n:
        raise ParamFileError(f"{path}: bias has {bias.size} values, expected {shape.n}")
    if not np.isfinite(weight).all() or not np.isfinite(bias).all():
        raise ParamFileError(f"{path}: non-finite value in payload")
    return LayerParams(weight=Tensor(shape, weight), bias=bias)


def peek_weight_shape(path) -> Shape4:
    """Read just the weight shape from a parameter file (header bytes only).

    Cheap metadata access for planning and validation; does not count as a
    payload read.  Falls back to a full decode if "shape" is not the first
    map key.
    """
    try:
        with open(path, "rb") as f:
            head = f.read(128)
    except OSError as e:
        raise ParamFileError(f"{path}: {e}") from None
    try:
        if head and head[0] == (0x80 | 3):
            key, pos = unpack_prefix(head[1:])
            if key == "shape":
                arr, _ = unpack_prefix(head[1 + pos :])
                return _as_shape(arr, path)
    except MsgpackError:
        pass
    return load_layer_params(path).weight.shape


def param_bytes(shape: Shape4) -> int:
    """Resident size of one layer: (weight elements + bias elements) * 4."""
    return (shape.count() + shape.n) * 4


def plan_cache(layer_sizes: dict[str, int], budget_mb: int) -> CachePlan:
    """Greedy largest-first selection under the budget, skipping non-fitters.

    `layer_sizes` is ordered by NetFile position; equal sizes tie-break to
    the earlier layer.  sort() is stable, so sorting by -size keeps that
    order inside each size class.
    """
    if budget_mb < 0:
        raise ValueError(f"budget_mb must be >= 0, got {budget_mb}")
    budget = budget_mb * (1 << 20)
    chosen: list[str] = []
    used = 0
    for name, size in sorted(layer_sizes.items(), key=lambda kv: -kv[1]):
        if size <= 0:
            raise ValueError(f"layer {name!r} has non-positive size {size}")
        if used + size <= budget:
            chosen.append(name)
            used += size
    return CachePlan(resident=frozenset(chosen), resident_bytes=used)


class ParamStore:
    """Parameter source for one model directory, with an instrumented
    read counter (`reads[layer]` counts full payload loads)."""

    def __init__(self, model_dir, files: dict[str, str]):
        self.model_dir = Path(model_dir)
        self.files = dict(files)  # layer name -> params_file (relative)
        self.reads: dict[str, int] = {name: 0 for name in files}

    def path(self, name: str) -> Path:
        return self.model_dir / self.files[name]

    def peek_shape(self, name: str) -> Shape4:
        return peek_weight_shape(self.path(name))

    def load(self, name: str) -> LayerParams:
        params = load_layer_params(self.path(name))
        self.reads[name] += 1
        return params


class ParamCache:
    """Serves layer parameters per the cache plan.

    Resident layers load from the store at most once per process (first
    fetch wins; concurrent fetchers wait on a per-layer lock).  Everything
    else is re-read on every fetch and released by the caller afterwards.
    """

    def __init__(self, store: ParamStore, plan: CachePlan):
        self.store = store
        self.plan = plan
        self._cache: dict[str, LayerParams] = {}
        self._locks = {name: threading.Lock() for name in plan.resident}

    def fetch(self, name: str) -> LayerParams:
        if name not in self.plan.resident:
            return self.store.load(name)
        got = self._cache.get(name)
        if got is not None:
            return got
        with self._locks[name]:
            if name not in self._cache:
                self._cache[name] = self.store.load(name)
            return self._cache[name]
