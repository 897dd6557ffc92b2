"""Plain Monte Carlo estimators."""

from __future__ import annotations

import numpy as np

from .binning import BinGrid, DistributionEstimate, histogram
from .problem import EvalCounter, ProblemDefinition


def _batches(n: int, batch: int):
    while n > 0:
        k = min(n, batch)
        yield k
        n -= k


def run_mc(problem: ProblemDefinition, n: int, rng: np.random.Generator,
           counter: EvalCounter | None = None, batch: int = 50_000) -> float:
    """Fraction of ``n`` prior draws with ``f(x) > threshold``."""
    hits = 0
    for k in _batches(n, batch):
        y = problem.evaluate_batch(problem.sample_prior(k, rng), counter)
        hits += int(np.count_nonzero(y > problem.threshold))
    return hits / n


def mc_distribution(problem: ProblemDefinition, grid: BinGrid, n: int,
                    rng: np.random.Generator, counter: EvalCounter | None = None,
                    batch: int = 50_000) -> DistributionEstimate:
    """Histogram estimate ``P_i = N_i / n`` from ``n`` prior draws."""
    return mc_tally(problem, grid, n, rng, counter, batch)[0]


def mc_tally(problem: ProblemDefinition, grid: BinGrid, n: int,
             rng: np.random.Generator, counter: EvalCounter | None = None,
             batch: int = 50_000) -> tuple[DistributionEstimate, float]:
    """Histogram estimate and threshold exceedance fraction from the same ``n`` draws."""
    counts = np.zeros(grid.m, dtype=np.int64)
    hits = 0
    for k in _batches(n, batch):
        y = problem.evaluate_batch(problem.sample_prior(k, rng), counter)
        counts += histogram(grid, y)[0]
        hits += int(np.count_nonzero(y > problem.threshold))
    return DistributionEstimate.from_probs(grid, counts / n), hits / n
