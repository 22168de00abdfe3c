"""Command-line front end.

Subcommand catalog:
  exact         closed-form chain analysis for one delta
  sweep         Monte Carlo campaign over a delta grid, report per delta
  tail          CCDF export plus log-linear decay fit for one delta
  monitor       drift monitor over a JSON-lines event stream (file or stdin)
  distribution  iteration-count histogram and percentiles for one delta

Exit codes: 0 success, 2 invalid flags, 3 I/O failure, 4 resource budget
exceeded, 5 malformed event line, 6 out-of-order event stream.

Every command is deterministic for a fixed flag set: reports are written
atomically (temp file then rename) and contain no wall-clock fields unless
--resource-metrics opts them in. The seed comes from --seed, then the
CONVLAB_SEED environment variable, then the built-in default.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .calibrate import (
    TRACE_CSV_HEADER,
    MonitorConfig,
    read_events_jsonl,
    replay,
    trace_entry_csv_row,
)
from .errors import InsufficientTailError, OutOfOrderError, ResourceLimitError
from .markov import (
    PipelineSpec,
    analyze,
    build_pipeline_chain,
    decompose,
    exact_expected_steps_closed_form,
    failure_counting_expected_steps,
)
from .regions import classify
from .simulate import DEFAULT_SUCCESS_CUTOFF, SimConfig, run_batch, run_sweep
from .stats import ccdf, nearest_rank_percentile, summarize, tail_decay_fit

__all__ = ["ReportRow", "main", "parse_deltas"]

DEFAULT_SEED = 42
DEFAULT_DELTAS = "0.1:0.9:0.1"
RANGE_TOLERANCE = 1e-9

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_RESOURCE = 4
EXIT_MALFORMED = 5
EXIT_OUT_OF_ORDER = 6


class UsageError(Exception):
    """Semantically invalid flag values; maps to exit code 2."""


@dataclass(frozen=True)
class ReportRow:
    """One sweep report line."""

    delta: float
    theory: float
    mean: float
    std: float
    conservative_factor: float
    p99: float
    success_rate_percent: float
    efficiency: float
    ci_width_99: float
    runtime_seconds: float
    throughput: float
    region: str


REPORT_COLUMNS = [
    "delta",
    "theory",
    "mean",
    "std",
    "conservative_factor",
    "p99",
    "success_rate_percent",
    "efficiency",
    "ci_width_99",
    "runtime_seconds",
    "throughput",
    "region",
]
VOLATILE_COLUMNS = {"runtime_seconds", "throughput"}


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def parse_deltas(text: str) -> list[float]:
    """Parse `start:end:step` (inclusive within 1e-9) or a comma list."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"range syntax is start:end:step, got {text!r}")
        start, end, step = (float(part) for part in parts)
        if step <= 0.0:
            raise ValueError(f"range step must be positive, got {step}")
        if end < start - RANGE_TOLERANCE:
            raise ValueError(f"range end {end} is below start {start}")
        values = []
        index = 0
        while True:
            value = start + index * step
            if value > end + RANGE_TOLERANCE:
                break
            values.append(round(value, 12))
            index += 1
        return values
    pieces = [piece for piece in text.split(",") if piece.strip()]
    if not pieces:
        raise ValueError("no deltas given")
    return [round(float(piece), 12) for piece in pieces]


def _resolve_seed(flag_value: int | None) -> int:
    if flag_value is not None:
        seed = flag_value
    elif "CONVLAB_SEED" in os.environ:
        raw = os.environ["CONVLAB_SEED"]
        try:
            seed = int(raw)
        except ValueError:
            raise UsageError(f"CONVLAB_SEED must be an integer, got {raw!r}") from None
    else:
        seed = DEFAULT_SEED
    if not 0 <= seed < 2**64:
        raise UsageError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def _write_atomic(path: Path, text: str) -> None:
    directory = path.parent if str(path.parent) else Path(".")
    descriptor, temp_name = tempfile.mkstemp(dir=directory, prefix=f".{path.name}.")
    try:
        with os.fdopen(descriptor, "w") as handle:
            handle.write(text)
        os.replace(temp_name, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(temp_name)
        raise


def _emit(text: str, out: str) -> None:
    if out == "-":
        sys.stdout.write(text)
    else:
        _write_atomic(Path(out), text)


def _info(message: str) -> None:
    print(message, file=sys.stderr)


# ---------------------------------------------------------------------------
# exact
# ---------------------------------------------------------------------------


def cmd_exact(args: argparse.Namespace) -> int:
    try:
        spec = PipelineSpec(delta=args.delta, stages=args.stages)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    analysis = analyze(decompose(build_pipeline_chain(spec)))
    attempts_form = exact_expected_steps_closed_form(spec)
    failures_form = failure_counting_expected_steps(spec)
    headline = attempts_form if args.counting_convention == "attempts" else failures_form
    payload = {
        "delta": spec.delta,
        "stages": spec.stages,
        "counting_convention": args.counting_convention,
        "expected_steps": analysis.expected_steps.tolist(),
        "expected_total": headline,
        "closed_form_attempts": attempts_form,
        "closed_form_failures": failures_form,
        "spectral_radius": analysis.spectral_radius,
        "tail_constant": analysis.tail_constant,
        "tail_constant_norm": analysis.tail_constant_norm,
    }
    if args.json:
        sys.stdout.write(json.dumps(payload, indent=2) + "\n")
        return EXIT_OK
    steps = " ".join(f"{value:.6f}" for value in analysis.expected_steps)
    print(f"delta                   {spec.delta:.6f}")
    print(f"stages                  {spec.stages}")
    print(f"expected steps by stage {steps}")
    print(f"expected total ({args.counting_convention}) {headline:.6f}")
    print(f"closed form, attempts   {attempts_form:.6f}")
    print(f"closed form, failures   {failures_form:.6f}")
    print(f"spectral radius         {analysis.spectral_radius:.6f}")
    print(f"tail constant (inf)     {analysis.tail_constant:.6f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


def _build_report_rows(batches) -> list[ReportRow]:
    rows = []
    for batch in batches:
        summary = summarize(batch)
        config = batch.config
        rows.append(
            ReportRow(
                delta=config.delta,
                theory=config.stages / config.delta,
                mean=summary.mean,
                std=summary.std,
                conservative_factor=summary.conservative_factor,
                p99=summary.p99,
                success_rate_percent=summary.success_rate * 100.0,
                efficiency=summary.efficiency,
                ci_width_99=summary.ci_width_99,
                runtime_seconds=batch.runtime_seconds,
                throughput=batch.throughput_trials_per_second,
                region=classify(config.delta).value,
            )
        )
    return rows


def _report_text(rows: list[ReportRow], fmt: str, include_volatile: bool) -> str:
    columns = [
        name
        for name in REPORT_COLUMNS
        if include_volatile or name not in VOLATILE_COLUMNS
    ]
    if fmt == "json":
        payload = [
            {name: getattr(row, name) for name in columns} for row in rows
        ]
        return json.dumps(payload, indent=2) + "\n"
    lines = [",".join(columns)]
    for row in rows:
        cells = []
        for name in columns:
            value = getattr(row, name)
            cells.append(value if name == "region" else f"{value:.6f}")
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def cmd_sweep(args: argparse.Namespace) -> int:
    try:
        deltas = parse_deltas(args.deltas)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    seed = _resolve_seed(args.seed)
    if args.trials < 1:
        raise UsageError(f"trials must be >= 1, got {args.trials}")
    for delta in deltas:
        if not 0.0 < delta <= 1.0:
            raise UsageError(f"delta must be in (0, 1], got {delta}")
    if args.cutoff < 4:
        raise UsageError(f"cutoff must be >= stages (4), got {args.cutoff}")

    batches = run_sweep(deltas, args.trials, seed, success_cutoff=args.cutoff)
    rows = _build_report_rows(batches)
    _emit(_report_text(rows, args.format, args.resource_metrics), args.out)

    total_trials = sum(batch.config.trials for batch in batches)
    total_runtime = sum(batch.runtime_seconds for batch in batches)
    peak = max(batch.peak_memory_bytes for batch in batches)
    _info(
        f"sweep: {total_trials} trials over {len(batches)} deltas in "
        f"{total_runtime:.4f}s ({total_trials / total_runtime:.0f} trials/s), "
        f"peak memory {peak} bytes"
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# tail
# ---------------------------------------------------------------------------


def cmd_tail(args: argparse.Namespace) -> int:
    seed = _resolve_seed(args.seed)
    try:
        config = SimConfig(delta=args.delta, trials=args.trials, seed=seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    batch = run_batch(config)
    series = ccdf(batch.totals)
    floor_prob = 10.0 / config.trials
    theoretical = math.log1p(-config.delta) if config.delta < 1.0 else None
    try:
        fitted = tail_decay_fit(series, floor_prob)
    except InsufficientTailError as exc:
        fitted = None
        _info(f"tail: no fit ({exc})")

    lines = ["k,ccdf"]
    lines.extend(f"{k},{prob:.6f}" for k, prob in series.points)
    _emit("\n".join(lines) + "\n", args.out)
    if args.out != "-":
        sidecar = {
            "delta": config.delta,
            "trials": config.trials,
            "seed": seed,
            "floor_prob": floor_prob,
            "fitted_slope": fitted,
            "theoretical_slope": theoretical,
        }
        _write_atomic(Path(f"{args.out}.meta.json"), json.dumps(sidecar, indent=2) + "\n")
    if fitted is not None:
        _info(f"tail: fitted slope {fitted:.6f}, theoretical {theoretical:.6f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# monitor
# ---------------------------------------------------------------------------


def cmd_monitor(args: argparse.Namespace) -> int:
    try:
        config = MonitorConfig(
            window_size=args.window,
            min_samples=args.min_samples,
            trigger_threshold=args.trigger,
            rearm_threshold=args.rearm,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None

    if args.input == "-":
        lines = sys.stdin.readlines()
    else:
        lines = Path(args.input).read_text().splitlines()
    try:
        events = read_events_jsonl(lines)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MALFORMED

    trace = replay(events, config)
    out_lines = [TRACE_CSV_HEADER]
    out_lines.extend(trace_entry_csv_row(entry) for entry in trace)
    _emit("\n".join(out_lines) + "\n", args.out)

    counts: dict[str, int] = {}
    for entry in trace:
        if entry.action.value != "NoAction":
            counts[entry.action.value] = counts.get(entry.action.value, 0) + 1
    triggered = ", ".join(f"{kind}: {count}" for kind, count in sorted(counts.items()))
    _info(
        f"monitor: {len(events)} events, {sum(counts.values())} actions"
        + (f" ({triggered})" if counts else "")
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# distribution
# ---------------------------------------------------------------------------


def cmd_distribution(args: argparse.Namespace) -> int:
    seed = _resolve_seed(args.seed)
    try:
        config = SimConfig(delta=args.delta, trials=args.trials, seed=seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    batch = run_batch(config)

    values, counts = np.unique(batch.totals, return_counts=True)
    lines = ["k,count"]
    lines.extend(f"{int(k)},{int(c)}" for k, c in zip(values, counts))
    _emit("\n".join(lines) + "\n", args.out)
    if args.out != "-":
        totals = batch.totals
        sidecar = {
            "delta": config.delta,
            "stages": config.stages,
            "trials": config.trials,
            "seed": seed,
            "min": int(totals.min()),
            "max": int(totals.max()),
            "mean": float(totals.mean()),
            "p25": nearest_rank_percentile(totals, 25),
            "p50": nearest_rank_percentile(totals, 50),
            "p75": nearest_rank_percentile(totals, 75),
            "p99": nearest_rank_percentile(totals, 99),
        }
        _write_atomic(Path(f"{args.out}.meta.json"), json.dumps(sidecar, indent=2) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser assembly
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="convlab",
        description="Retry-pipeline convergence analysis and simulation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    exact = sub.add_parser("exact", help="closed-form chain analysis")
    exact.add_argument("--delta", type=float, required=True)
    exact.add_argument("--stages", type=int, default=4)
    exact.add_argument(
        "--counting-convention",
        choices=("attempts", "failures"),
        default="attempts",
    )
    exact.add_argument("--json", action="store_true")
    exact.set_defaults(handler=cmd_exact)

    sweep = sub.add_parser("sweep", help="Monte Carlo campaign over a delta grid")
    sweep.add_argument("--deltas", default=DEFAULT_DELTAS)
    sweep.add_argument("--trials", type=int, default=10_000)
    sweep.add_argument("--seed", type=int, default=None)
    sweep.add_argument("--cutoff", type=int, default=DEFAULT_SUCCESS_CUTOFF)
    sweep.add_argument("--out", default="-")
    sweep.add_argument("--format", choices=("csv", "json"), default="csv")
    sweep.add_argument(
        "--resource-metrics",
        action="store_true",
        help="include wall-clock columns (breaks byte-identical re-runs)",
    )
    sweep.set_defaults(handler=cmd_sweep)

    tail = sub.add_parser("tail", help="CCDF export and decay fit")
    tail.add_argument("--delta", type=float, required=True)
    tail.add_argument("--trials", type=int, default=10_000)
    tail.add_argument("--seed", type=int, default=None)
    tail.add_argument("--out", default="-")
    tail.set_defaults(handler=cmd_tail)

    monitor = sub.add_parser("monitor", help="drift monitor over an event stream")
    monitor.add_argument("--input", required=True, help="event file, or - for stdin")
    monitor.add_argument("--window", type=int, default=100)
    monitor.add_argument("--min-samples", type=int, default=30)
    monitor.add_argument("--trigger", type=float, default=0.3)
    monitor.add_argument("--rearm", type=float, default=0.35)
    monitor.add_argument("--out", default="-")
    monitor.set_defaults(handler=cmd_monitor)

    distribution = sub.add_parser("distribution", help="iteration-count histogram")
    distribution.add_argument("--delta", type=float, required=True)
    distribution.add_argument("--trials", type=int, default=10_000)
    distribution.add_argument("--seed", type=int, default=None)
    distribution.add_argument("--out", default="-")
    distribution.set_defaults(handler=cmd_distribution)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return args.handler(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ResourceLimitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except OutOfOrderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OUT_OF_ORDER
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
