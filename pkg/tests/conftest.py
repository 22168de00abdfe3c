"""Shared fixtures: the reference campaign and the large calibration batches.

Both fixtures are deterministic (fixed base seed 42, batch seeds split per
index) so every statistical assertion in the suite is repeatable bit for bit.
"""

import numpy as np
import pytest

from convlab import SimConfig, run_batch, run_sweep
from convlab.rng import child_seed

DELTAS = [round(0.1 * i, 1) for i in range(1, 10)]
CAMPAIGN_SEED = 42
CAMPAIGN_TRIALS = 10_000
MILLION_TRIALS = 1_000_000


@pytest.fixture(scope="session")
def campaign_batches():
    """The 90,000-trial reference campaign: 10,000 trials per delta."""
    return run_sweep(DELTAS, CAMPAIGN_TRIALS, CAMPAIGN_SEED)


@pytest.fixture(scope="session")
def million_totals():
    """Per-delta totals at one million trials; sojourn matrices are dropped
    so the retained footprint stays under ~80 MB."""
    totals = {}
    for index, delta in enumerate(DELTAS):
        config = SimConfig(
            delta=delta, trials=MILLION_TRIALS, seed=child_seed(CAMPAIGN_SEED, index)
        )
        totals[delta] = run_batch(config).totals
    return totals


def geometric_chi_square(column, delta, bins=20):
    """Chi-square statistic of integer samples against Geometric(delta),
    support {1,2,...}, with the tail beyond `bins` pooled into one cell."""
    column = np.asarray(column)
    n = column.size
    statistic = 0.0
    for k in range(1, bins + 1):
        expected = n * (1.0 - delta) ** (k - 1) * delta
        observed = int((column == k).sum())
        statistic += (observed - expected) ** 2 / expected
    tail_expected = n * (1.0 - delta) ** bins
    tail_observed = int((column > bins).sum())
    if tail_expected > 0.0:
        statistic += (tail_observed - tail_expected) ** 2 / tail_expected
    return statistic
