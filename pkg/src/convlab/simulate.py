"""Vectorized Monte Carlo engine for the retry pipeline.

A trial is one pipeline run: each stage retries until it succeeds, so the
per-stage iteration count is geometric on {1, 2, ...} and the trial total is
their sum. A whole batch is generated in a handful of array operations:
draw a (trials x stages) uniform block, invert the geometric CDF, row-sum.

Sampling uses inversion, k = ceil(ln(u) / ln(1 - delta)) with u in (0, 1),
which reproduces the geometric law exactly rather than simulating repeated
attempts. Batches are bit-reproducible: the same config always yields the
same arrays (see rng module for the stream derivation).
"""

from __future__ import annotations

import csv
import json
import time
import tracemalloc
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ResourceLimitError
from .rng import child_seed, generator, validate_seed

__all__ = [
    "DEFAULT_SUCCESS_CUTOFF",
    "DEFAULT_CELL_BUDGET",
    "SimConfig",
    "TrialBatch",
    "sample_geometric",
    "run_batch",
    "run_sweep",
    "export_batch_csv",
]

DEFAULT_SUCCESS_CUTOFF = 1000
DEFAULT_CELL_BUDGET = 2**28   # sojourn cells; 4-stage batches cap at ~67M trials


@dataclass(frozen=True)
class SimConfig:
    """One batch request: pipeline shape, trial count, seed, success cutoff."""

    delta: float
    stages: int = 4
    trials: int = 10_000
    seed: int = 0
    success_cutoff: int = DEFAULT_SUCCESS_CUTOFF

    def __post_init__(self) -> None:
        if not 0.0 < self.delta <= 1.0:
            raise ValueError(f"delta must be in (0, 1], got {self.delta}")
        if self.stages < 1:
            raise ValueError(f"stages must be >= 1, got {self.stages}")
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        validate_seed(self.seed)
        if self.success_cutoff < self.stages:
            raise ValueError(
                f"success_cutoff must be >= stages, got {self.success_cutoff}"
            )


@dataclass(frozen=True)
class TrialBatch:
    """Immutable results of one batch plus its resource metrics."""

    sojourns: np.ndarray            # (trials, stages) int64, iterations per stage
    totals: np.ndarray              # (trials,) int64 row sums
    success_flags: np.ndarray       # (trials,) bool, totals <= success_cutoff
    config: SimConfig
    runtime_seconds: float
    throughput_trials_per_second: float
    peak_memory_bytes: int

    def __post_init__(self) -> None:
        sojourns = np.asarray(self.sojourns)
        totals = np.asarray(self.totals)
        flags = np.asarray(self.success_flags)
        if sojourns.shape != (self.config.trials, self.config.stages):
            raise ValueError("sojourn matrix shape does not match config")
        if np.any(sojourns < 1):
            raise ValueError("sojourn counts must be >= 1")
        if not np.array_equal(totals, sojourns.sum(axis=1)):
            raise ValueError("totals must equal sojourn row sums")
        if not np.array_equal(flags, totals <= self.config.success_cutoff):
            raise ValueError("success flags must equal totals <= success_cutoff")
        if self.runtime_seconds <= 0.0:
            raise ValueError("runtime_seconds must be positive")
        for name, arr in (("sojourns", sojourns), ("totals", totals), ("success_flags", flags)):
            arr = arr.copy() if not arr.flags.owndata else arr
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def success_rate(self) -> float:
        return float(self.success_flags.mean())


def sample_geometric(delta: float, uniform_draw: float) -> int:
    """Invert one uniform draw into a geometric iteration count on {1, 2, ...}."""
    if not 0.0 < delta <= 1.0:
        raise ValueError(f"delta must be in (0, 1], got {delta}")
    if not 0.0 < uniform_draw < 1.0:
        raise ValueError(f"uniform draw must lie in (0, 1), got {uniform_draw}")
    if delta == 1.0:
        return 1
    # same log kernels as the batch path so scalar and vector agree bit-exactly
    count = int(np.ceil(np.log(uniform_draw) / np.log1p(-delta)))
    return max(1, count)


def _generate_sojourns(config: SimConfig, rng: np.random.Generator) -> np.ndarray:
    shape = (config.trials, config.stages)
    if config.delta == 1.0:
        return np.ones(shape, dtype=np.int64)
    draws = rng.random(shape)
    np.subtract(1.0, draws, out=draws)     # map [0, 1) to (0, 1]
    np.log(draws, out=draws)
    draws /= np.log1p(-config.delta)
    sojourns = np.ceil(draws).astype(np.int64)
    np.maximum(sojourns, 1, out=sojourns)  # guard the u == 1.0 edge
    return sojourns


def run_batch(config: SimConfig, max_cells: int = DEFAULT_CELL_BUDGET) -> TrialBatch:
    """Generate one batch; raises ResourceLimitError before allocating past budget."""
    cells = config.trials * config.stages
    if cells > max_cells:
        raise ResourceLimitError(
            f"batch needs {cells} cells, budget is {max_cells}"
        )
    rng = generator(config.seed)

    was_tracing = tracemalloc.is_tracing()
    if was_tracing:
        tracemalloc.reset_peak()
    else:
        tracemalloc.start()
    start = time.perf_counter()
    sojourns = _generate_sojourns(config, rng)
    totals = sojourns.sum(axis=1)
    flags = totals <= config.success_cutoff
    runtime = time.perf_counter() - start
    _, peak = tracemalloc.get_traced_memory()
    if not was_tracing:
        tracemalloc.stop()

    runtime = max(runtime, 1e-9)
    return TrialBatch(
        sojourns=sojourns,
        totals=totals,
        success_flags=flags,
        config=config,
        runtime_seconds=runtime,
        throughput_trials_per_second=config.trials / runtime,
        peak_memory_bytes=int(peak),
    )


def run_sweep(
    deltas: Sequence[float],
    trials: int,
    base_seed: int,
    *,
    stages: int = 4,
    success_cutoff: int = DEFAULT_SUCCESS_CUTOFF,
    max_cells: int = DEFAULT_CELL_BUDGET,
) -> list[TrialBatch]:
    """Run one batch per delta; batch i draws from child_seed(base_seed, i)."""
    if not deltas:
        raise ValueError("sweep needs at least one delta")
    batches = []
    for index, delta in enumerate(deltas):
        config = SimConfig(
            delta=delta,
            stages=stages,
            trials=trials,
            seed=child_seed(base_seed, index),
            success_cutoff=success_cutoff,
        )
        batches.append(run_batch(config, max_cells=max_cells))
    return batches


def export_batch_csv(batch: TrialBatch, path: str | Path) -> None:
    """Write per-trial rows plus a `<path>.meta.json` sidecar.

    Header: trial,stage1,...,stageN,total,success. Sojourn counts are written
    as integers so a round trip is bit-exact; success is 1/0.
    """
    path = Path(path)
    stage_names = [f"stage{j + 1}" for j in range(batch.config.stages)]
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["trial", *stage_names, "total", "success"])
        rows = np.column_stack(
            [
                np.arange(batch.config.trials, dtype=np.int64),
                batch.sojourns,
                batch.totals,
                batch.success_flags.astype(np.int64),
            ]
        )
        writer.writerows(rows.tolist())
    sidecar = {
        "config": asdict(batch.config),
        "seed": batch.config.seed,
        "runtime_seconds": batch.runtime_seconds,
        "throughput_trials_per_second": batch.throughput_trials_per_second,
        "peak_memory_bytes": batch.peak_memory_bytes,
    }
    Path(f"{path}.meta.json").write_text(json.dumps(sidecar, indent=2) + "\n")
