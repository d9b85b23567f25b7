"""First-run auto-tuner: benchmark the tuning-parameter grid, keep the best.

The tuning parameters set the granularity of parallel execution: how many
output rows a convolution task covers, how many reduction positions are
materialized per inner step, and how many output features a fully-connected
task covers.  The tuner times every candidate in the grid on the host,
picks the minimum-median one and persists it next to the model so later
runs skip the search.  Candidates never change results, only speed (see
layers module), so the choice is purely a performance decision.
"""

from __future__ import annotations

import itertools
import os
import platform
import statistics
import time
from dataclasses import dataclass
from pathlib import Path

ROWS_PER_ITEM_GRID = (1, 2, 4, 8)
VEC_WIDTH_GRID = (4, 8, 16)
FC_OUTPUTS_GRID = (1, 4, 16)


class ProfileError(ValueError):
    """Corrupt or out-of-grid tuning profile file."""


@dataclass(frozen=True)
class TuningProfile:
    rows_per_item: int = 1
    vec_width: int = 4
    fc_outputs_per_item: int = 1

    def __post_init__(self):
        for value, grid, name in (
            (self.rows_per_item, ROWS_PER_ITEM_GRID, "rows_per_item"),
            (self.vec_width, VEC_WIDTH_GRID, "vec_width"),
            (self.fc_outputs_per_item, FC_OUTPUTS_GRID, "fc_outputs_per_item"),
        ):
            if value not in grid:
                raise ProfileError(f"{name} must be one of {grid}, got {value}")


DEFAULT_PROFILE = TuningProfile(1, 4, 1)

# Full cartesian grid, in tie-break order (earlier wins on equal medians).
PROFILE_GRID = tuple(
    TuningProfile(r, v, f)
    for r, v, f in itertools.product(ROWS_PER_ITEM_GRID, VEC_WIDTH_GRID, FC_OUTPUTS_GRID)
)


@dataclass
class TuneReport:
    entries: list[tuple[TuningProfile, float]]  # (candidate, median ns)
    chosen: TuningProfile
    host: str
    repetitions: int


def host_descriptor() -> str:
    return f"{platform.system()}-{platform.machine()}-cpu{os.cpu_count()}"


def select_best(medians) -> int:
    """Index of the minimum median; first index wins ties."""
    return min(range(len(medians)), key=lambda i: medians[i])


def tune(net, sample, repetitions: int, clock=time.perf_counter_ns, workers: int = 0) -> TuneReport:
    """Time every candidate on the sample batch and pick the fastest.

    Only the conv and fully-connected layers are timed (they dominate);
    their inputs are captured from one forward pass, then re-run per
    candidate with 1 warm-up plus `repetitions` timed passes.  `clock` is
    injectable so selection logic is testable with scripted timings.
    """
    if repetitions < 3:
        raise ValueError(f"repetitions must be >= 3, got {repetitions}")
    if repetitions % 2 == 0:
        raise ValueError(f"repetitions must be odd for the median, got {repetitions}")

    from concurrent.futures import ThreadPoolExecutor

    from . import engine, layers

    entries = engine.capture_conv_fc_inputs(net, sample)
    medians: list[float] = []
    n_workers = workers if workers > 0 else (os.cpu_count() or 1)
    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        for candidate in PROFILE_GRID:
            em = layers.ExecMode("parallel", candidate, n_workers, pool)

            def run_once():
                for spec, params, x in entries:
                    engine.apply_layer(spec, x, params, em)

            run_once()  # warm-up, untimed
            times = []
            for _ in range(repetitions):
                t0 = clock()
                run_once()
                t1 = clock()
                times.append(t1 - t0)
            medians.append(statistics.median(times))

    chosen = PROFILE_GRID[select_best(medians)]
    return TuneReport(
        entries=list(zip(PROFILE_GRID, medians)),
        chosen=chosen,
        host=host_descriptor(),
        repetitions=repetitions,
    )


def save_profile(profile: TuningProfile, path, host: str | None = None) -> None:
    text = (
        f"rows_per_item={profile.rows_per_item}\n"
        f"vec_width={profile.vec_width}\n"
        f"fc_outputs_per_item={profile.fc_outputs_per_item}\n"
        f"host={host if host is not None else host_descriptor()}\n"
    )
    Path(path).write_text(text)


def load_profile(path) -> tuple[TuningProfile, bool]:
    """Load a saved profile; (defaults, False) when the file is missing.

    A present-but-corrupt file raises ProfileError rather than silently
    falling back to defaults.
    """
    p = Path(path)
    if not p.exists():
        return DEFAULT_PROFILE, False
    fields: dict[str, str] = {}
    for lineno, line in enumerate(p.read_text().splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if "=" not in line:
            raise ProfileError(f"{path}: line {lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        fields[key.strip()] = value.strip()
    try:
        ints = {k: int(fields[k]) for k in ("rows_per_item", "vec_width", "fc_outputs_per_item")}
    except KeyError as e:
        raise ProfileError(f"{path}: missing key {e.args[0]!r}") from None
    except ValueError:
        raise ProfileError(f"{path}: tuning parameters must be integers") from None
    return TuningProfile(**ints), True
