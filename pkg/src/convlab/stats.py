"""Statistical summaries and distribution checks for trial batches.

Percentiles are nearest-rank: the p-th percentile of n sorted values is the
element at 1-based rank ceil(p/100 * n). Standard deviation and variance use
the n-1 denominator; skewness and excess kurtosis use bias-uncorrected
central moments and are 0 by convention when the variance is 0.

The analytic reference for trial totals is the negative binomial law for
`stages` successes at probability delta, pmf
C(k-1, stages-1) * delta**stages * (1-delta)**(k-stages) on k >= stages.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyInputError, InsufficientDataError, InsufficientTailError
from .simulate import TrialBatch

__all__ = [
    "SummaryStats",
    "CcdfSeries",
    "summarize",
    "nearest_rank_percentile",
    "conservative_factor",
    "iteration_efficiency",
    "ci_width_99",
    "ccdf",
    "tail_decay_fit",
    "negbin_pmf",
    "negbin_cdf",
    "negbin_quantile",
    "SUMMARY_CSV_HEADER",
    "summary_csv_row",
]

CI_99_MULTIPLIER = 2.576


@dataclass(frozen=True)
class SummaryStats:
    """Moments, percentiles, and derived ratios for one batch of totals."""

    n: int
    mean: float
    std: float
    variance: float
    skewness: float
    kurtosis: float          # excess kurtosis, normal = 0
    p25: float
    p75: float
    p99: float
    iqr: float
    success_rate: float
    conservative_factor: float
    efficiency: float
    ci_width_99: float


@dataclass(frozen=True)
class CcdfSeries:
    """Complementary CDF points (k, P(total > k)), one per distinct total."""

    points: tuple[tuple[int, float], ...]


def nearest_rank_percentile(values: np.ndarray, percentile: float) -> float:
    """Nearest-rank percentile of a 1-d sample."""
    arr = np.sort(np.asarray(values))
    if arr.size == 0:
        raise EmptyInputError("percentile of an empty sample is undefined")
    if not 0.0 < percentile <= 100.0:
        raise ValueError(f"percentile must be in (0, 100], got {percentile}")
    rank = math.ceil(percentile / 100.0 * arr.size)
    return float(arr[max(rank, 1) - 1])


def conservative_factor(delta: float, mean: float, stages: int = 4) -> float:
    """Theory-to-observation ratio (stages / delta) / mean."""
    if not 0.0 < delta <= 1.0:
        raise ValueError(f"delta must be in (0, 1], got {delta}")
    if mean <= 0.0:
        raise ValueError(f"mean must be positive, got {mean}")
    return (stages / delta) / mean


def iteration_efficiency(mean: float, stages: int = 4) -> float:
    """Fraction of iterations that advanced the pipeline: stages / mean."""
    if mean < stages:
        raise ValueError(
            f"mean {mean} below stages {stages}; totals cannot average below stages"
        )
    return stages / mean


def ci_width_99(std: float, n: int) -> float:
    """Half-width of the 99% normal-approximation interval for the mean."""
    if n < 1:
        raise ValueError(f"sample size must be >= 1, got {n}")
    if std < 0.0:
        raise ValueError(f"std must be non-negative, got {std}")
    return CI_99_MULTIPLIER * std / math.sqrt(n)


def summarize(batch: TrialBatch) -> SummaryStats:
    """Full summary of a batch's totals; requires at least 2 trials."""
    totals = batch.totals.astype(float)
    n = totals.size
    if n < 2:
        raise InsufficientDataError(f"summary needs >= 2 trials, got {n}")
    mean = float(totals.mean())
    variance = float(totals.var(ddof=1))
    std = math.sqrt(variance)
    centered = totals - mean
    m2 = float(np.mean(centered**2))
    if m2 == 0.0:
        skewness = 0.0
        kurtosis = 0.0
    else:
        skewness = float(np.mean(centered**3)) / m2**1.5
        kurtosis = float(np.mean(centered**4)) / m2**2 - 3.0
    p25 = nearest_rank_percentile(totals, 25)
    p75 = nearest_rank_percentile(totals, 75)
    p99 = nearest_rank_percentile(totals, 99)
    return SummaryStats(
        n=n,
        mean=mean,
        std=std,
        variance=variance,
        skewness=skewness,
        kurtosis=kurtosis,
        p25=p25,
        p75=p75,
        p99=p99,
        iqr=p75 - p25,
        success_rate=batch.success_rate,
        conservative_factor=conservative_factor(
            batch.config.delta, mean, batch.config.stages
        ),
        efficiency=iteration_efficiency(mean, batch.config.stages),
        ci_width_99=ci_width_99(std, n),
    )


def ccdf(totals: np.ndarray) -> CcdfSeries:
    """Empirical P(total > k) at every distinct k, in increasing k."""
    arr = np.asarray(totals)
    if arr.size == 0:
        raise EmptyInputError("ccdf of an empty sample is undefined")
    values, counts = np.unique(arr, return_counts=True)
    greater = arr.size - np.cumsum(counts)
    probs = greater / arr.size
    return CcdfSeries(
        points=tuple(
            (int(k), float(p)) for k, p in zip(values.tolist(), probs.tolist())
        )
    )


def tail_decay_fit(series: CcdfSeries, floor_prob: float) -> float:
    """OLS slope of ln(prob) against k over points with prob > floor_prob."""
    if floor_prob <= 0.0:
        raise ValueError(f"noise floor must be positive, got {floor_prob}")
    kept = [(k, p) for k, p in series.points if p > floor_prob]
    if len(kept) < 3:
        raise InsufficientTailError(
            f"{len(kept)} points above the noise floor; need >= 3 to fit"
        )
    ks = np.array([k for k, _ in kept], dtype=float)
    logs = np.log(np.array([p for _, p in kept]))
    slope, _ = np.polyfit(ks, logs, 1)
    return float(slope)


# ---------------------------------------------------------------------------
# negative binomial reference law
# ---------------------------------------------------------------------------


def _check_negbin_args(stages: int, delta: float) -> None:
    if stages < 1:
        raise ValueError(f"stages must be >= 1, got {stages}")
    if not 0.0 < delta <= 1.0:
        raise ValueError(f"delta must be in (0, 1], got {delta}")


def negbin_pmf(k: int, stages: int, delta: float) -> float:
    """P(total iterations = k) for the stage-sum law; 0 below k = stages."""
    _check_negbin_args(stages, delta)
    if k < stages:
        return 0.0
    return (
        math.comb(k - 1, stages - 1)
        * delta**stages
        * (1.0 - delta) ** (k - stages)
    )


def negbin_cdf(k: int, stages: int, delta: float) -> float:
    """P(total iterations <= k), summed termwise from k = stages."""
    _check_negbin_args(stages, delta)
    return sum(negbin_pmf(j, stages, delta) for j in range(stages, k + 1))


def negbin_quantile(q: float, stages: int, delta: float) -> int:
    """Smallest k with CDF(k) >= q, found by forward pmf summation."""
    _check_negbin_args(stages, delta)
    if not 0.0 < q < 1.0:
        raise ValueError(f"quantile level must be in (0, 1), got {q}")
    cumulative = 0.0
    k = stages
    while True:
        cumulative += negbin_pmf(k, stages, delta)
        if cumulative >= q:
            return k
        k += 1


# ---------------------------------------------------------------------------
# summary export
# ---------------------------------------------------------------------------

SUMMARY_CSV_HEADER = (
    "delta,theory,mean,std,conservative_factor,p99,success_rate_percent,"
    "variance,skewness,kurtosis,p25,p75,iqr,efficiency,ci_width_99"
)


def summary_csv_row(delta: float, stages: int, summary: SummaryStats) -> str:
    """One fixed-format (6-decimal) CSV row matching SUMMARY_CSV_HEADER."""
    fields = [
        delta,
        stages / delta,
        summary.mean,
        summary.std,
        summary.conservative_factor,
        summary.p99,
        summary.success_rate * 100.0,
        summary.variance,
        summary.skewness,
        summary.kurtosis,
        summary.p25,
        summary.p75,
        summary.iqr,
        summary.efficiency,
        summary.ci_width_99,
    ]
    return ",".join(f"{value:.6f}" for value in fields)
