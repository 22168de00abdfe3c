"""Convergence analysis toolkit for multi-stage retry pipelines.

The model: a generation pipeline advances through a fixed number of stages,
each stage needing a geometrically distributed number of attempts with a
shared per-attempt success probability. The package provides the exact
absorbing-chain analysis, a vectorized simulator, distribution statistics,
operating-region classification, and an online drift monitor, plus a CLI
(`convlab`) wrapping all of it.
"""

from .calibrate import (
    ActionKind,
    CalibrationAction,
    CalibrationState,
    MonitorConfig,
    StageEvent,
    TraceEntry,
    estimate_delta,
    observe,
    parse_event_line,
    read_events_jsonl,
    replay,
    synthesize_drift_stream,
    write_events_jsonl,
)
from .errors import (
    ConvlabError,
    EmptyInputError,
    InsufficientDataError,
    InsufficientTailError,
    NotAbsorbingError,
    OutOfOrderError,
    ResourceLimitError,
    SingularMatrixError,
    TerminalStateError,
)
from .harness import (
    BernoulliOracle,
    ConstantOracle,
    CrossValidationReport,
    PipelineState,
    TraceRecord,
    cross_validate,
    run_to_absorption,
    step,
    trace_events,
)
from .markov import (
    CanonicalDecomposition,
    ChainAnalysis,
    PipelineSpec,
    StochasticMatrix,
    analyze,
    build_pipeline_chain,
    decompose,
    eigenvalue_radius,
    exact_expected_steps_closed_form,
    failure_counting_expected_steps,
    power_iteration_radius,
    spectral_radius,
    tail_bound,
)
from .regions import (
    DEFAULT_THRESHOLDS,
    RegionLabel,
    RegionThresholds,
    classify,
    recommended_timeout,
)
from .rng import child_seed, generator, validate_seed
from .simulate import SimConfig, TrialBatch, run_batch, run_sweep, sample_geometric
from .stats import (
    CcdfSeries,
    SummaryStats,
    ccdf,
    ci_width_99,
    conservative_factor,
    iteration_efficiency,
    nearest_rank_percentile,
    negbin_cdf,
    negbin_pmf,
    negbin_quantile,
    summarize,
    tail_decay_fit,
)

__version__ = "0.1.0"

__all__ = [
    "ActionKind",
    "BernoulliOracle",
    "CalibrationAction",
    "CalibrationState",
    "CanonicalDecomposition",
    "CcdfSeries",
    "ChainAnalysis",
    "ConstantOracle",
    "ConvlabError",
    "CrossValidationReport",
    "DEFAULT_THRESHOLDS",
    "EmptyInputError",
    "InsufficientDataError",
    "InsufficientTailError",
    "MonitorConfig",
    "NotAbsorbingError",
    "OutOfOrderError",
    "PipelineSpec",
    "PipelineState",
    "RegionLabel",
    "RegionThresholds",
    "ResourceLimitError",
    "SimConfig",
    "SingularMatrixError",
    "StageEvent",
    "StochasticMatrix",
    "SummaryStats",
    "TerminalStateError",
    "TraceEntry",
    "TraceRecord",
    "TrialBatch",
    "analyze",
    "build_pipeline_chain",
    "ccdf",
    "child_seed",
    "ci_width_99",
    "classify",
    "conservative_factor",
    "cross_validate",
    "decompose",
    "eigenvalue_radius",
    "estimate_delta",
    "exact_expected_steps_closed_form",
    "failure_counting_expected_steps",
    "generator",
    "iteration_efficiency",
    "nearest_rank_percentile",
    "negbin_cdf",
    "negbin_pmf",
    "negbin_quantile",
    "observe",
    "parse_event_line",
    "power_iteration_radius",
    "read_events_jsonl",
    "recommended_timeout",
    "replay",
    "run_batch",
    "run_sweep",
    "run_to_absorption",
    "sample_geometric",
    "spectral_radius",
    "step",
    "summarize",
    "synthesize_drift_stream",
    "tail_bound",
    "tail_decay_fit",
    "trace_events",
    "validate_seed",
    "write_events_jsonl",
]
