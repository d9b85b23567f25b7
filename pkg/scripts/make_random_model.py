#!/usr/bin/env python3
"""Generate a random-weight model directory for one of the benchmark nets.

Writes model_param_<layer>.msg files matching the golden NetFiles, plus an
input tensor file of zeros so `cnnkit run` works out of the box:

    python3 scripts/make_random_model.py lenet /tmp/lenet-model --batch 2
    cnnkit run golden/lenet.netfile /tmp/lenet-model /tmp/lenet-model/input.tensor /tmp/out.tensor
"""

import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from cnnkit import Shape4, Tensor, zoo
from cnnkit.tensorio import write_tensor


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("topology", choices=sorted(zoo.TOPOLOGIES))
    ap.add_argument("out_dir")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--batch", type=int, default=1)
    args = ap.parse_args()

    out = Path(args.out_dir)
    written = zoo.write_random_model(args.topology, out, seed=args.seed)
    c, h, w = zoo.TOPOLOGIES[args.topology][0]
    write_tensor(
        out / "input.tensor",
        Tensor(Shape4(args.batch, c, h, w), np.zeros(args.batch * c * h * w, np.float32)),
    )
    total = sum(p.nbytes() for p in written.values())
    print(f"model_dir={out}")
    print(f"layers={len(written)}")
    print(f"param_bytes={total}")
    print(f"input_file={out / 'input.tensor'}")


if __name__ == "__main__":
    main()
