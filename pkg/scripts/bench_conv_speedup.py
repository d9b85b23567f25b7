#!/usr/bin/env python3
"""Sequential vs parallel speedup on the heaviest AlexNet convolution.

Builds a single-layer network shaped like AlexNet's first convolution
(3->96 channels, 11x11 kernels, stride 4, 227x227 input), auto-tunes it,
then reports per-image runtimes and the speedup over 10 repetitions.

    python3 scripts/bench_conv_speedup.py --batch 1 --workers 0
"""

import argparse
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

import numpy as np

from cnnkit.cli import main as cli_main
from cnnkit.modelstore import PARAM_FILE_TEMPLATE, LayerParams, write_layer_params
from cnnkit.tensor import Shape4, Tensor

NETFILE = """\
allocated_ram: 64
execution_mode: parallel
auto_tuning: on

layer {
  kind: conv
  name: conv1
  params_file: model_param_conv1.msg
  pad: 0
  stride: 4
  group: 1
  fused_relu: true
}
"""


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--batch", type=int, default=1)
    ap.add_argument("--reps", type=int, default=10)
    ap.add_argument("--workers", type=int, default=0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    with tempfile.TemporaryDirectory() as d:
        model = Path(d)
        weight = rng.standard_normal((96, 3, 11, 11), dtype=np.float32) * np.float32(0.05)
        bias = rng.standard_normal(96, dtype=np.float32) * np.float32(0.1)
        write_layer_params(
            model / PARAM_FILE_TEMPLATE.format(name="conv1"),
            LayerParams(weight=Tensor(Shape4(96, 3, 11, 11), weight), bias=bias),
        )
        (model / "conv1.netfile").write_text(NETFILE)
        return cli_main([
            "benchmark", str(model / "conv1.netfile"), str(model),
            "--input-shape", "3,227,227",
            "--batch", str(args.batch), "--reps", str(args.reps),
            "--workers", str(args.workers),
        ])


if __name__ == "__main__":
    sys.exit(main())
