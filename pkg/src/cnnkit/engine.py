"""End-to-end forward execution of a parsed NetFile.

Building a network normalizes standalone relu layers into the fused form
on their conv/fc predecessor, validates shapes layer by layer, plans which
parameters stay RAM-resident under the allocated_ram budget, and picks up
a saved tuning profile when one exists.  compute() then runs the layer
pipeline left to right, fetching non-resident parameters per call and
releasing them after each layer.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import layers
from .autotune import TuningProfile, load_profile
from .layers import ConvGeometry, ExecMode
from .modelstore import CachePlan, ParamCache, ParamFileError, ParamStore, param_bytes, plan_cache
from .netfile import LayerSpec, NetConfig, validate_shapes
from .tensor import Shape4, ShapeError, Tensor

PROFILE_FILENAME = "tuning_profile.txt"


@dataclass
class Network:
    config: NetConfig  # normalized: no standalone relu directly after conv/fc
    input_shape: Shape4
    shapes: list[Shape4]  # output shape of each normalized layer
    plan: CachePlan
    profile: TuningProfile
    store: ParamStore
    cache: ParamCache


def fuse_relu(specs: list[LayerSpec]) -> list[LayerSpec]:
    """Fold standalone relu layers into a conv/fc predecessor."""
    out: list[LayerSpec] = []
    for spec in specs:
        if spec.kind == "relu" and out and out[-1].kind in ("conv", "fc"):
            out[-1] = replace(out[-1], fused_relu=True)
        else:
            out.append(replace(spec))
    return out


def build_network(
    cfg: NetConfig, model_dir, input_shape: Shape4, profile: TuningProfile | None = None
) -> Network:
    model_dir = Path(model_dir)
    fused = fuse_relu(cfg.layers)
    norm_cfg = NetConfig(
        layers=fused,
        allocated_ram=cfg.allocated_ram,
        execution_mode=cfg.execution_mode,
        auto_tuning=cfg.auto_tuning,
    )

    store = ParamStore(
        model_dir, {s.name: s.params_file for s in fused if s.kind in ("conv", "fc")}
    )
    weight_shapes = {}
    for spec in fused:
        if spec.kind not in ("conv", "fc"):
            continue
        try:
            weight_shapes[spec.name] = store.peek_shape(spec.name).dims()
        except ParamFileError as e:
            raise ParamFileError(f"layer {spec.name!r}: {e}") from None

    shapes = validate_shapes(norm_cfg, input_shape, weight_shapes)

    sizes = {name: param_bytes(Shape4(*dims)) for name, dims in weight_shapes.items()}
    plan = plan_cache(sizes, cfg.allocated_ram)

    if profile is None:
        profile, _ = load_profile(model_dir / PROFILE_FILENAME)
    return Network(
        config=norm_cfg,
        input_shape=input_shape,
        shapes=shapes,
        plan=plan,
        profile=profile,
        store=store,
        cache=ParamCache(store, plan),
    )


def apply_layer(spec: LayerSpec, x: Tensor, params, m: ExecMode) -> Tensor:
    if spec.kind == "conv":
        geom = ConvGeometry(pad=spec.pad, stride=spec.stride, group=spec.group)
        return layers.conv_forward(x, params, geom, spec.fused_relu, m)
    if spec.kind == "fc":
        return layers.fc_forward(x, params, spec.fused_relu, m)
    if spec.kind == "pool":
        return layers.pool_forward(x, spec.kernel_h, spec.kernel_w, spec.stride, spec.pool_mode, m)
    if spec.kind == "relu":
        return layers.relu(x, m)
    if spec.kind == "lrn":
        return layers.lrn_forward(x, spec.lrn_n, spec.lrn_alpha, spec.lrn_beta, spec.lrn_k, m)
    if spec.kind == "softmax":
        return layers.softmax(x, m)
    raise ValueError(f"unknown layer kind {spec.kind!r}")


def compute(
    net: Network,
    batch: Tensor,
    mode: str | None = None,
    workers: int = 0,
    profile: TuningProfile | None = None,
    timings: list | None = None,
) -> Tensor:
    """Run the batch through every layer in order.

    `timings`, when given, receives one (layer_name, compute_seconds,
    fetch_seconds) triple per layer; parameter loading is kept out of the
    compute time, mirroring how runtimes are reported.
    """
    bs = batch.shape
    want = net.input_shape
    if (bs.c, bs.h, bs.w) != (want.c, want.h, want.w):
        raise ShapeError(
            f"batch shape {bs.dims()} does not match network input "
            f"(expected (*, {want.c}, {want.h}, {want.w}))"
        )
    mode_name = mode if mode is not None else net.config.execution_mode
    prof = profile if profile is not None else net.profile

    em = ExecMode(mode=mode_name, profile=prof, workers=workers)
    pool = None
    try:
        if em.mode == "parallel" and em.workers > 1:
            pool = ThreadPoolExecutor(max_workers=em.workers)
            em.pool = pool
        cur = batch
        for spec in net.config.layers:
            params = None
            f0 = time.perf_counter()
            if spec.kind in ("conv", "fc"):
                params = net.cache.fetch(spec.name)
            f1 = time.perf_counter()
            t0 = time.perf_counter()
            cur = apply_layer(spec, cur, params, em)
            t1 = time.perf_counter()
            if timings is not None:
                timings.append((spec.name, t1 - t0, f1 - f0))
            del params  # non-resident parameters are released per layer
        return cur
    finally:
        if pool is not None:
            pool.shutdown(wait=False)


def capture_conv_fc_inputs(net: Network, batch: Tensor):
    """One forward pass recording (spec, params, input) for conv/fc layers.

    The auto-tuner replays exactly these layer invocations per candidate,
    so timing excludes everything but the compute-dominant layers.
    """
    em = ExecMode(mode="sequential")
    entries = []
    cur = batch
    for spec in net.config.layers:
        params = net.cache.fetch(spec.name) if spec.kind in ("conv", "fc") else None
        if params is not None:
            entries.append((spec, params, cur))
        cur = apply_layer(spec, cur, params, em)
    return entries


def mse(a: Tensor, b: Tensor) -> float:
    """Mean squared difference, accumulated in float64."""
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape.dims()} vs {b.shape.dims()}")
    d = a.data.astype(np.float64) - b.data.astype(np.float64)
    return float(np.mean(d * d))
