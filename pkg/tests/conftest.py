from pathlib import Path

import numpy as np
import pytest

from cnnkit import LayerParams, Shape4, Tensor

REPO_ROOT = Path(__file__).resolve().parent.parent
GOLDEN_DIR = REPO_ROOT / "golden"


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def rand_tensor(rng, n, c, h, w, scale=1.0):
    data = rng.standard_normal((n, c, h, w), dtype=np.float32) * np.float32(scale)
    return Tensor.from_array(data)


def rand_conv_params(rng, k, cpg, kh, kw):
    fan_in = cpg * kh * kw
    weight = rng.standard_normal((k, cpg, kh, kw), dtype=np.float32) * np.float32(
        fan_in**-0.5
    )
    bias = rng.standard_normal(k, dtype=np.float32) * np.float32(0.1)
    return LayerParams(weight=Tensor(Shape4(k, cpg, kh, kw), weight), bias=bias)


def rand_fc_params(rng, out_f, in_f):
    weight = rng.standard_normal((out_f, in_f, 1, 1), dtype=np.float32) * np.float32(
        in_f**-0.5
    )
    bias = rng.standard_normal(out_f, dtype=np.float32) * np.float32(0.1)
    return LayerParams(weight=Tensor(Shape4(out_f, in_f, 1, 1), weight), bias=bias)


def conv_instances(rng, count):
    """Random small strict-fit convolution instances."""
    made = 0
    while made < count:
        kh, kw = int(rng.integers(1, 5)), int(rng.integers(1, 5))
        stride = int(rng.integers(1, 4))
        pad = int(rng.integers(0, 3))
        oh, ow = int(rng.integers(1, 6)), int(rng.integers(1, 6))
        h = (oh - 1) * stride + kh - 2 * pad
        w = (ow - 1) * stride + kw - 2 * pad
        if h < 1 or w < 1:
            continue
        group = int(rng.integers(1, 4))
        cpg = int(rng.integers(1, 4))
        kpg = int(rng.integers(1, 4))
        n = int(rng.integers(1, 4))
        x = rand_tensor(rng, n, cpg * group, h, w)
        p = rand_conv_params(rng, kpg * group, cpg, kh, kw)
        made += 1
        yield x, p, pad, stride, group


def pool_instances(rng, count):
    made = 0
    while made < count:
        kh, kw = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        stride = int(rng.integers(1, 4))
        oh, ow = int(rng.integers(1, 6)), int(rng.integers(1, 6))
        h, w = (oh - 1) * stride + kh, (ow - 1) * stride + kw
        n, c = int(rng.integers(1, 4)), int(rng.integers(1, 5))
        made += 1
        yield rand_tensor(rng, n, c, h, w), kh, kw, stride


def fc_instances(rng, count):
    for _ in range(count):
        n = int(rng.integers(1, 5))
        c, h, w = int(rng.integers(1, 5)), int(rng.integers(1, 4)), int(rng.integers(1, 8))
        out_f = int(rng.integers(1, 20))
        yield rand_tensor(rng, n, c, h, w), rand_fc_params(rng, out_f, c * h * w)
