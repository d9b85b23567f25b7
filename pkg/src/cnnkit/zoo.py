"""Benchmark network topologies and random-weight model generation.

The three entries mirror the golden NetFiles under golden/: weight shapes
for every parameterized layer plus the expected input geometry.  Weights
are drawn from a seeded normal scaled by 1/sqrt(fan_in), which keeps
activations O(1) through arbitrarily deep stacks.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .modelstore import PARAM_FILE_TEMPLATE, LayerParams, write_layer_params
from .tensor import Shape4, Tensor

# name -> (input (c, h, w), {layer: weight shape (k, c/g, kh, kw) | (out, in, 1, 1)})
TOPOLOGIES: dict[str, tuple[tuple[int, int, int], dict[str, tuple[int, int, int, int]]]] = {
    "lenet": (
        (1, 28, 28),
        {
            "conv1": (20, 1, 5, 5),
            "conv2": (50, 20, 5, 5),
            "fc1": (500, 800, 1, 1),
            "fc2": (10, 500, 1, 1),
        },
    ),
    "alex_cifar10": (
        (3, 32, 32),
        {
            "conv1": (32, 3, 5, 5),
            "conv2": (32, 32, 5, 5),
            "conv3": (64, 32, 5, 5),
            "fc1": (64, 1024, 1, 1),
            "fc2": (10, 64, 1, 1),
        },
    ),
    "alexnet": (
        (3, 227, 227),
        {
            "conv1": (96, 3, 11, 11),
            "conv2": (256, 48, 5, 5),
            "conv3": (384, 256, 3, 3),
            "conv4": (384, 192, 3, 3),
            "conv5": (256, 192, 3, 3),
            "fc6": (4096, 9216, 1, 1),
            "fc7": (4096, 4096, 1, 1),
            "fc8": (1000, 4096, 1, 1),
        },
    ),
}


def random_params(shape: tuple[int, int, int, int], rng: np.random.Generator) -> LayerParams:
    fan_in = shape[1] * shape[2] * shape[3]
    scale = 1.0 / math.sqrt(fan_in)
    weight = rng.standard_normal(shape, dtype=np.float32) * np.float32(scale)
    bias = rng.standard_normal(shape[0], dtype=np.float32) * np.float32(0.1)
    return LayerParams(weight=Tensor(Shape4(*shape), weight), bias=bias)


def write_random_model(name: str, model_dir, seed: int = 0) -> dict[str, LayerParams]:
    """Write model_param_<layer>.msg files for one benchmark topology."""
    if name not in TOPOLOGIES:
        raise KeyError(f"unknown topology {name!r}; choose from {sorted(TOPOLOGIES)}")
    model_dir = Path(model_dir)
    model_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    written = {}
    for layer, shape in TOPOLOGIES[name][1].items():
        params = random_params(shape, rng)
        write_layer_params(model_dir / PARAM_FILE_TEMPLATE.format(name=layer), params)
        written[layer] = params
    return written


def input_shape(name: str, batch: int = 1) -> Shape4:
    c, h, w = TOPOLOGIES[name][0]
    return Shape4(batch, c, h, w)
