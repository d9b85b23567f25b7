"""Numerical kernels for the six layer types, sequential and data-parallel.

Every kernel exists in one vectorized form that both execution modes share;
the modes differ only in how output elements are partitioned into tasks
(sequential: one task per image run in order; parallel: tasks spread over a
thread pool).  Convolution and fully-connected inner products follow a fixed
accumulation contract so that partitioning can never change results:

  * the reduction axis (input-channel x kernel-row x kernel-col for conv,
    flattened input features for fc) is cut into cells of 4 consecutive
    positions starting at offset 0;
  * each cell's partial sum is ((p0 + p1) + p2) + p3, left to right;
  * the accumulator starts at the bias and adds cell partials in ascending
    cell order, then any tail positions (fewer than 4) one by one;
  * all products and sums are float32, via plain elementwise ufuncs whose
    per-element results cannot depend on slice extents.

The tuning profile only changes execution granularity: rows_per_item and
fc_outputs_per_item size the parallel work items, vec_width sets how many
reduction positions feed one inner step (whole cells at a time).  None of
them touch the tree above, which is why sequential vs parallel outputs and
outputs across all tuning profiles are bitwise identical -- the property
the auto-tuner relies on.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .autotune import DEFAULT_PROFILE, TuningProfile
from .modelstore import LayerParams
from .tensor import Shape4, ShapeError, Tensor, conv_output_shape, pool_output_shape


@dataclass(frozen=True)
class ConvGeometry:
    pad: int = 0
    stride: int = 1
    group: int = 1

    def __post_init__(self):
        if self.stride < 1 or self.pad < 0 or self.group < 1:
            raise ShapeError(
                f"bad conv geometry: pad={self.pad} stride={self.stride} group={self.group}"
            )


@dataclass
class ExecMode:
    """Execution mode plus the tuning profile used in parallel mode."""

    mode: str = "parallel"
    profile: TuningProfile = field(default_factory=lambda: DEFAULT_PROFILE)
    workers: int = 0  # 0 means use all hardware threads
    pool: ThreadPoolExecutor | None = None  # optional shared pool (engine-owned)

    def __post_init__(self):
        if self.mode not in ("sequential", "parallel"):
            raise ValueError(f"mode must be sequential or parallel, got {self.mode!r}")
        if self.workers <= 0:
            self.workers = os.cpu_count() or 1


def sequential() -> ExecMode:
    return ExecMode(mode="sequential")


def parallel(profile: TuningProfile | None = None, workers: int = 0) -> ExecMode:
    return ExecMode(mode="parallel", profile=profile or DEFAULT_PROFILE, workers=workers)


def _run(tasks, m: ExecMode) -> None:
    """Run closures either in order or on the worker pool (fork/join)."""
    if m.mode == "sequential" or m.workers == 1 or len(tasks) <= 1:
        for t in tasks:
            t()
        return
    if m.pool is not None:
        list(m.pool.map(lambda t: t(), tasks))
        return
    with ThreadPoolExecutor(max_workers=m.workers) as pool:
        list(pool.map(lambda t: t(), tasks))


def _chunks(items, workers):
    """Split a work-item list into at most `workers` contiguous runs."""
    n_chunks = min(len(items), max(1, workers))
    bounds = [round(k * len(items) / n_chunks) for k in range(n_chunks + 1)]
    return [items[a:b] for a, b in zip(bounds, bounds[1:]) if b > a]


# ---------------------------------------------------------------- convolution


def _check_conv_args(x: Tensor, p: LayerParams, g: ConvGeometry) -> Shape4:
    K, cpg, kh, kw = p.weight.shape.dims()
    c_in = x.shape.c
    if c_in % g.group != 0 or K % g.group != 0:
        raise ShapeError(
            f"group {g.group} does not divide input channels {c_in} and kernels {K}"
        )
    if cpg != c_in // g.group:
        raise ShapeError(
            f"weight has {cpg} channels per group, input supplies {c_in // g.group}"
        )
    return conv_output_shape(x.shape, K, kh, kw, g.pad, g.stride)


def _pad_input(x4: np.ndarray, pad: int) -> np.ndarray:
    if pad == 0:
        return x4
    n, c, h, w = x4.shape
    out = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=np.float32)
    out[:, :, pad : pad + h, pad : pad + w] = x4
    return out


def _conv_extent(out4, xpad, w, bias, g: ConvGeometry, fused_relu, n0, n1, y0, y1, vec_width):
    """Fill out4[n0:n1, :, y0:y1, :] following the fixed accumulation order.

    The reduction axis (channel, kernel-row, kernel-col) is walked in flat
    order as cells of 4 positions: each cell's partial is ((p0+p1)+p2)+p3,
    the accumulator starts at the bias and adds cell partials in ascending
    cell order, then tail positions one by one; everything float32.  Only
    plain elementwise ufuncs are used (they release the GIL and their
    per-element results cannot depend on slice extents), so any partition
    of the output yields bitwise-identical values.
    """
    K, cpg, kh, kw = w.shape
    s = g.stride
    groups = g.group
    kpg = K // groups
    ow = out4.shape[3]
    rows = y1 - y0
    nb = n1 - n0

    out4[n0:n1, :, y0:y1, :] = bias[None, :, None, None]
    positions = [(c, i, j) for c in range(cpg) for i in range(kh) for j in range(kw)]
    L = len(positions)
    cells4 = (L // 4) * 4
    cell = np.empty((nb, kpg, rows, ow), dtype=np.float32)
    prod = np.empty_like(cell)

    def view(grp, q):
        c, i, j = positions[q]
        sl = xpad[
            n0:n1,
            grp * cpg + c,
            y0 * s + i : (y1 - 1) * s + i + 1 : s,
            j : j + (ow - 1) * s + 1 : s,
        ]
        return sl[:, None, :, :]

    for grp in range(groups):
        acc = out4[n0:n1, grp * kpg : (grp + 1) * kpg, y0:y1, :]
        wg = w[grp * kpg : (grp + 1) * kpg].reshape(kpg, 1, 1, L)
        # vec_width groups whole cells per step; the per-cell operations and
        # their order are identical for every width.
        for q0 in range(0, cells4, vec_width):
            for qc in range(q0, min(q0 + vec_width, cells4), 4):
                np.multiply(view(grp, qc), wg[:, :, :, qc], out=cell)
                for d in (1, 2, 3):
                    np.multiply(view(grp, qc + d), wg[:, :, :, qc + d], out=prod)
                    cell += prod
                acc += cell
        for q in range(cells4, L):  # scalar tail
            np.multiply(view(grp, q), wg[:, :, :, q], out=prod)
            acc += prod

    if fused_relu:
        np.maximum(out4[n0:n1, :, y0:y1, :], np.float32(0), out=out4[n0:n1, :, y0:y1, :])


def _merge_items(items, cap_rows):
    """Coalesce contiguous (image, y0, y1) work items into fat extents.

    Adjacent row blocks of one image merge, and whole-image extents over
    consecutive images merge into one multi-image slice, as long as the
    extent stays under cap_rows total rows (keeps scratch buffers
    cache-sized).  Pure execution coalescing: per-element results are
    unaffected by extent boundaries.
    """
    rows: list[list[int]] = []
    for img, y0, y1 in items:
        prev = rows[-1] if rows else None
        if prev and prev[0] == img and prev[2] == y0 and (y1 - prev[1]) <= cap_rows:
            prev[2] = y1
        else:
            rows.append([img, y0, y1])
    merged: list[list[int]] = []
    for img, y0, y1 in rows:
        prev = merged[-1] if merged else None
        if (
            prev
            and prev[2] == y0
            and prev[3] == y1
            and prev[1] == img
            and (img + 1 - prev[0]) * (y1 - y0) <= cap_rows
        ):
            prev[1] = img + 1
        else:
            merged.append([img, img + 1, y0, y1])
    return [tuple(e) for e in merged]


def conv_forward(
    x: Tensor, p: LayerParams, g: ConvGeometry, fused_relu: bool, m: ExecMode
) -> Tensor:
    out_shape = _check_conv_args(x, p, g)
    xpad = _pad_input(x.view4(), g.pad)
    w4 = p.weight.view4()
    out4 = np.empty(out_shape.dims(), dtype=np.float32)
    n, oh = out_shape.n, out_shape.h

    # cap scratch buffers around 2 MB of float32 per extent
    kpg = p.weight.shape.n // g.group
    cap_rows = max(1, (1 << 19) // (kpg * out_shape.w))
    if m.mode == "sequential":
        extent_groups = [[(i, i + 1, 0, oh)] for i in range(n)]
    else:
        # work items are (image, rows_per_item output rows); contiguous items
        # landing in the same worker chunk coalesce into one fat slice, so
        # rows_per_item is the load-balancing granularity
        rpi = m.profile.rows_per_item
        items = [(i, y, min(y + rpi, oh)) for i in range(n) for y in range(0, oh, rpi)]
        extent_groups = [
            _merge_items(chunk, cap_rows) for chunk in _chunks(items, m.workers)
        ]
    vec_width = m.profile.vec_width

    def run_group(extents):
        for e in extents:
            _conv_extent(out4, xpad, w4, p.bias, g, fused_relu, *e, vec_width)

    tasks = [(lambda grp: lambda: run_group(grp))(grp) for grp in extent_groups]
    _run(tasks, m)
    return Tensor(out_shape, out4)


# -------------------------------------------------------------------- pooling


def _pool_image(out4, x4, kh, kw, stride, mode, n):
    oh, ow = out4.shape[2], out4.shape[3]
    s = stride
    o = out4[n]

    def win(i, j):
        return x4[n, :, i : (oh - 1) * s + i + 1 : s, j : j + (ow - 1) * s + 1 : s]

    o[...] = win(0, 0)
    for i in range(kh):
        for j in range(kw):
            if i == 0 and j == 0:
                continue
            if mode == "max":
                np.maximum(o, win(i, j), out=o)
            else:
                o += win(i, j)
    if mode == "mean":
        o /= np.float32(kh * kw)


def pool_forward(x: Tensor, kh: int, kw: int, stride: int, mode: str, m: ExecMode) -> Tensor:
    if mode not in ("max", "mean"):
        raise ValueError(f"pool mode must be max or mean, got {mode!r}")
    out_shape = pool_output_shape(x.shape, kh, kw, stride)
    x4 = x.view4()
    out4 = np.empty(out_shape.dims(), dtype=np.float32)
    tasks = [
        (lambda i: lambda: _pool_image(out4, x4, kh, kw, stride, mode, i))(i)
        for i in range(out_shape.n)
    ]
    _run(tasks, m)
    return Tensor(out_shape, out4)


# ------------------------------------------------------------ fully connected


def _fc_block(out2, xflat, w2, bias, fused_relu, o0, o1, vec_width):
    """Fill out2[:, o0:o1]; same fixed accumulation order as convolution."""
    n = xflat.shape[0]
    nf = xflat.shape[1]
    ob = o1 - o0
    acc = out2[:, o0:o1]
    acc[...] = bias[None, o0:o1]
    wblk = w2[o0:o1]
    cells4 = (nf // 4) * 4

    for f0 in range(0, cells4, vec_width):
        f1 = min(f0 + vec_width, cells4)
        prod = xflat[:, None, f0:f1] * wblk[None, :, f0:f1]  # (n, ob, chunk)
        cells = prod.reshape(n, ob, (f1 - f0) // 4, 4)
        t = ((cells[..., 0] + cells[..., 1]) + cells[..., 2]) + cells[..., 3]
        for b in range((f1 - f0) // 4):
            acc += t[:, :, b]
    for f in range(cells4, nf):  # scalar tail
        acc += xflat[:, None, f] * wblk[None, :, f]
    if fused_relu:
        np.maximum(acc, np.float32(0), out=acc)


def fc_forward(x: Tensor, p: LayerParams, fused_relu: bool, m: ExecMode) -> Tensor:
    out_f, in_f = p.weight.shape.n, p.weight.shape.c
    flat = x.shape.c * x.shape.h * x.shape.w
    if in_f != flat:
        raise ShapeError(f"fc weight expects {in_f} input features, input flattens to {flat}")
    if (p.weight.shape.h, p.weight.shape.w) != (1, 1):
        raise ShapeError(f"fc weight must be (out, in, 1, 1), got {p.weight.shape.dims()}")
    xflat = x.view4().reshape(x.shape.n, flat)
    w2 = p.weight.view4().reshape(out_f, in_f)
    out2 = np.empty((x.shape.n, out_f), dtype=np.float32)

    if m.mode == "sequential":
        blocks = [(0, out_f)]
    else:
        # work items are fc_outputs_per_item output features; contiguous
        # items in one worker chunk coalesce into a single block
        opi = m.profile.fc_outputs_per_item
        items = [(o, min(o + opi, out_f)) for o in range(0, out_f, opi)]
        blocks = [(chunk[0][0], chunk[-1][1]) for chunk in _chunks(items, m.workers)]
    vec_width = m.profile.vec_width
    tasks = [
        (lambda b: lambda: _fc_block(out2, xflat, w2, p.bias, fused_relu, *b, vec_width))(b)
        for b in blocks
    ]
    _run(tasks, m)
    return Tensor(Shape4(x.shape.n, out_f, 1, 1), out2)


# ------------------------------------------------------- elementwise / norms


def relu(x: Tensor, m: ExecMode) -> Tensor:
    x4 = x.view4()
    out4 = np.empty_like(x4)
    tasks = [
        (lambda i: lambda: np.maximum(x4[i], np.float32(0), out=out4[i]))(i)
        for i in range(x.shape.n)
    ]
    _run(tasks, m)
    return Tensor(x.shape, out4)


def _lrn_image(out4, x4, n_size, alpha, beta, k, n):
    x = x4[n].astype(np.float64)
    sq = x * x
    half = (n_size - 1) // 2
    c_count = x.shape[0]
    scale = alpha / n_size
    for c in range(c_count):
        lo, hi = max(0, c - half), min(c_count - 1, c + half)
        s = sq[lo].copy()
        for j in range(lo + 1, hi + 1):
            s += sq[j]
        out4[n, c] = x[c] / (k + scale * s) ** beta


def lrn_forward(
    x: Tensor, n_size: int, alpha: float, beta: float, k: float, m: ExecMode
) -> Tensor:
    if n_size < 1 or n_size % 2 == 0:
        raise ValueError(f"lrn window must be an odd int >= 1, got {n_size}")
    if k <= 0:
        raise ValueError(f"lrn k must be > 0, got {k}")
    x4 = x.view4()
    out4 = np.empty(x.shape.dims(), dtype=np.float32)
    tasks = [
        (lambda i: lambda: _lrn_image(out4, x4, n_size, alpha, beta, k, i))(i)
        for i in range(x.shape.n)
    ]
    _run(tasks, m)
    return Tensor(x.shape, out4)


def _softmax_image(out4, x4, n):
    x = x4[n].astype(np.float64)  # (C, H, W)
    e = np.exp(x - x.max(axis=0))
    out4[n] = e / e.sum(axis=0)


def softmax(x: Tensor, m: ExecMode) -> Tensor:
    """Softmax over the channel dimension, per image and spatial position."""
    x4 = x.view4()
    out4 = np.empty(x.shape.dims(), dtype=np.float32)
    tasks = [(lambda i: lambda: _softmax_image(out4, x4, i))(i) for i in range(x.shape.n)]
    _run(tasks, m)
    return Tensor(x.shape, out4)
