"""Command-line surface: run, verify, benchmark and tune networks.

All commands are non-interactive and print machine-parseable key=value
report lines.  Exit codes: 0 success, 1 verification failure, 2 operational
error.  Reported runtimes exclude parameter loading unless --include-io is
given.
"""

from __future__ import annotations

import argparse
import statistics
import sys
import time
from pathlib import Path

import numpy as np

from . import autotune, engine
from .autotune import ProfileError, load_profile, save_profile
from .modelstore import ParamFileError
from .msgpackio import MsgpackError
from .netfile import NetFileError, parse_netfile
from .tensor import Shape4, ShapeError, Tensor
from .tensorio import TensorFileError, read_tensor, write_tensor

OK, VERIFY_FAILED, OP_ERROR = 0, 1, 2


def _load_config(path: str):
    return parse_netfile(Path(path).read_text())


def _parse_chw(text: str) -> tuple[int, int, int]:
    parts = text.split(",")
    if len(parts) != 3:
        raise ValueError(f"--input-shape expects C,H,W, got {text!r}")
    return tuple(int(p) for p in parts)  # type: ignore[return-value]


def _first_image(batch: Tensor) -> Tensor:
    s = batch.shape
    return Tensor(Shape4(1, s.c, s.h, s.w), batch.view4()[:1])


def _ensure_tuned(net, cfg, model_dir: Path, sample: Tensor) -> None:
    """First-run auto-tuning: tune once when enabled and no profile exists."""
    if cfg.auto_tuning != "on":
        return
    path = model_dir / engine.PROFILE_FILENAME
    profile, tuned = load_profile(path)
    if tuned:
        net.profile = profile
        return
    print("auto_tuning=first_run", file=sys.stderr)
    report = autotune.tune(net, sample, repetitions=3)
    save_profile(report.chosen, path, host=report.host)
    net.profile = report.chosen


def _timed_compute(net, batch, mode, workers, include_io):
    timings: list = []
    out = engine.compute(net, batch, mode=mode, workers=workers, timings=timings)
    total = sum(t for _, t, f in timings)
    if include_io:
        total += sum(f for _, t, f in timings)
    return out, total, timings


def cmd_run(args) -> int:
    cfg = _load_config(args.netfile)
    batch = read_tensor(args.input)
    net = engine.build_network(cfg, args.model_dir, batch.shape)
    _ensure_tuned(net, cfg, Path(args.model_dir), _first_image(batch))
    out, total, timings = _timed_compute(net, batch, args.mode, args.workers, args.include_io)
    write_tensor(args.output, out)
    for name, t, f in timings:
        line = f"{name}_ms={t * 1e3:.3f}"
        if args.include_io:
            line += f" {name}_io_ms={f * 1e3:.3f}"
        print(line, file=sys.stderr)
    print(f"total_ms={total * 1e3:.3f}", file=sys.stderr)
    print(f"output_file={args.output}")
    return OK


def cmd_verify(args) -> int:
    cfg = _load_config(args.netfile)
    batch = read_tensor(args.input)
    reference = read_tensor(args.reference)
    net = engine.build_network(cfg, args.model_dir, batch.shape)
    _ensure_tuned(net, cfg, Path(args.model_dir), _first_image(batch))
    out = engine.compute(net, batch, mode=args.mode, workers=args.workers)
    value = engine.mse(out, reference)
    print(f"mse={value:.6e}")
    print(f"threshold={args.threshold:.6e}")
    return OK if value <= args.threshold else VERIFY_FAILED


def _synthetic_batch(n: int, chw: tuple[int, int, int], seed: int = 0) -> Tensor:
    c, h, w = chw
    rng = np.random.default_rng(seed)
    data = rng.standard_normal((n, c, h, w), dtype=np.float32) * np.float32(0.1)
    return Tensor(Shape4(n, c, h, w), data)


def cmd_benchmark(args) -> int:
    cfg = _load_config(args.netfile)
    batch = _synthetic_batch(args.batch, _parse_chw(args.input_shape))
    net = engine.build_network(cfg, args.model_dir, batch.shape)
    _ensure_tuned(net, cfg, Path(args.model_dir), _first_image(batch))

    def measure(mode: str) -> float:
        _timed_compute(net, batch, mode, args.workers, args.include_io)  # warm-up
        totals = []
        for _ in range(args.reps):
            _, total, _ = _timed_compute(net, batch, mode, args.workers, args.include_io)
            totals.append(total)
        return statistics.fmean(totals)

    baseline = measure("sequential")
    target_mode = args.mode or "parallel"
    target = baseline if target_mode == "sequential" else measure(target_mode)

    print(f"batch={args.batch}")
    print(f"reps={args.reps}")
    print(f"sequential_ms_per_image={baseline * 1e3 / args.batch:.3f}")
    if target_mode == "parallel":
        print(f"parallel_ms_per_image={target * 1e3 / args.batch:.3f}")
    print(f"speedup={baseline / target:.3f}")
    return OK


def cmd_tune(args) -> int:
    cfg = _load_config(args.netfile)
    model_dir = Path(args.model_dir)
    if cfg.auto_tuning == "off" and not args.force:
        print("error: auto_tuning is off in the NetFile (use --force to tune anyway)", file=sys.stderr)
        return OP_ERROR
    path = model_dir / engine.PROFILE_FILENAME
    if path.exists() and not args.force:
        profile, _ = load_profile(path)
        print("already_tuned=true")
        print(f"rows_per_item={profile.rows_per_item}")
        print(f"vec_width={profile.vec_width}")
        print(f"fc_outputs_per_item={profile.fc_outputs_per_item}")
        return OK
    batch = _synthetic_batch(1, _parse_chw(args.input_shape))
    net = engine.build_network(cfg, model_dir, batch.shape)
    report = autotune.tune(net, batch, repetitions=args.reps, workers=args.workers)
    save_profile(report.chosen, path, host=report.host)
    for candidate, median in report.entries:
        print(
            f"candidate rows_per_item={candidate.rows_per_item} "
            f"vec_width={candidate.vec_width} "
            f"fc_outputs_per_item={candidate.fc_outputs_per_item} "
            f"median_ns={median:.0f}"
        )
    print(f"chosen_rows_per_item={report.chosen.rows_per_item}")
    print(f"chosen_vec_width={report.chosen.vec_width}")
    print(f"chosen_fc_outputs_per_item={report.chosen.fc_outputs_per_item}")
    print(f"profile_file={path}")
    return OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cnnkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, input_shape=False):
        p.add_argument("netfile")
        p.add_argument("model_dir")
        p.add_argument("--mode", choices=("sequential", "parallel"), default=None)
        p.add_argument("--workers", type=int, default=0)
        p.add_argument("--include-io", action="store_true")
        if input_shape:
            p.add_argument("--input-shape", required=True, help="C,H,W of one input image")

    p_run = sub.add_parser("run", help="execute a network on an input tensor file")
    common(p_run)
    p_run.add_argument("input")
    p_run.add_argument("output")
    p_run.set_defaults(func=cmd_run)

    p_verify = sub.add_parser("verify", help="compare engine output against a reference tensor")
    common(p_verify)
    p_verify.add_argument("input")
    p_verify.add_argument("reference")
    p_verify.add_argument("--threshold", type=float, default=1e-10)
    p_verify.set_defaults(func=cmd_verify)

    p_bench = sub.add_parser("benchmark", help="per-image runtime, sequential vs parallel")
    common(p_bench, input_shape=True)
    p_bench.add_argument("--batch", type=int, default=16)
    p_bench.add_argument("--reps", type=int, default=10)
    p_bench.set_defaults(func=cmd_benchmark)

    p_tune = sub.add_parser("tune", help="run the auto-tuner and save the profile")
    common(p_tune, input_shape=True)
    p_tune.add_argument("--force", action="store_true")
    p_tune.add_argument("--reps", type=int, default=5)
    p_tune.set_defaults(func=cmd_tune)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (
        NetFileError,
        ShapeError,
        ParamFileError,
        ProfileError,
        MsgpackError,
        TensorFileError,
        OSError,
        ValueError,
    ) as e:
        print(f"error: {e}", file=sys.stderr)
        return OP_ERROR


if __name__ == "__main__":
    sys.exit(main())
