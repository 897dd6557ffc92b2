"""Multicanonical Monte Carlo with the uniform-weight flat-histogram bias.

The biased density on the active bins ``lo..m`` is ``q(x) ∝ pi(x) / Theta(f(x))``.
Each iteration draws samples from ``q`` with the multi-chain kernel, tallies
bin counts ``N_i`` and sets ``Theta_i <- (N_i / n) * Theta_i`` up to
normalization, which drives the output histogram toward flat.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .binning import BinGrid, DistributionEstimate, histogram
from .kernel import ChainSamples, ProposalSpec, TargetSpec, multi_chain_sample, select_seeds
from .problem import EvalCounter, ProblemDefinition


class InitializationError(RuntimeError):
    """No starting point inside the active domain could be found."""


@dataclass(frozen=True)
class ThetaTable:
    """Positive bin weights for bins ``lo..lo+len(values)-1``, summing to one."""

    lo: int
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size == 0:
            raise ValueError("Theta values must be a nonempty vector")
        if not np.all(v > 0) or not np.all(np.isfinite(v)):
            raise ValueError("Theta values must be strictly positive and finite")
        object.__setattr__(self, "values", v / v.sum())
        object.__setattr__(self, "lo", int(self.lo))

    @classmethod
    def uniform(cls, lo: int, m: int) -> "ThetaTable":
        return cls(lo, np.ones(m - lo + 1))

    @property
    def hi(self) -> int:
        return self.lo + len(self.values) - 1

    def log_values(self) -> np.ndarray:
        return np.log(self.values)

    def target(self, problem: ProblemDefinition, grid: BinGrid) -> TargetSpec:
        if self.hi != grid.m:
            raise ValueError("Theta table must extend to the last bin")
        return TargetSpec(problem, grid, self.lo, self.log_values())


def biasing_log_weight(theta: ThetaTable, grid: BinGrid, y: float) -> float:
    """``log Theta_i`` for the active bin containing ``y``."""
    i = int(grid.indices(y))
    if i == 0 or not theta.lo <= i <= theta.hi:
        raise ValueError(f"y={y} is outside the active bins {theta.lo}..{theta.hi}")
    return float(np.log(theta.values[i - theta.lo]))


def update_theta(theta: ThetaTable, counts, n: int, rho: float = 1.0,
                 empty: str = "neighbor") -> ThetaTable:
    """One flat-histogram update ``Theta_i <- (N_i / n) Theta_i / rho``, renormalized.

    Bins without samples cannot use the formula (it would zero them). With
    ``empty="neighbor"`` they receive the same factor ``N_k / n`` as the
    nearest occupied bin ``k``, so their ratio to that bin is frozen; with
    ``empty="keep"`` they keep their previous weight unchanged. ``rho`` and the
    kernel normalization only rescale the table and drop out.
    """
    counts = np.asarray(counts, dtype=float)
    if counts.shape != theta.values.shape:
        raise ValueError("counts must cover exactly the active bins")
    if n <= 0:
        raise ValueError("n must be positive")
    if not counts.any():
        raise ValueError("all bin counts are zero; no information to update Theta")
    factor = counts / n / rho
    if empty == "keep":
        new = np.where(counts > 0, factor * theta.values, theta.values)
    elif empty == "neighbor":
        occupied = np.flatnonzero(counts > 0)
        pos = np.arange(counts.size)
        j = np.clip(np.searchsorted(occupied, pos), 0, occupied.size - 1)
        below = occupied[np.maximum(j - 1, 0)]
        above = occupied[j]
        nearest = np.where(np.abs(pos - below) <= np.abs(above - pos), below, above)
        new = factor[nearest] * theta.values
    else:
        raise ValueError(f"unknown empty-bin rule {empty!r}")
    return ThetaTable(theta.lo, new)


def bin_probs_from_theta(theta: ThetaTable, rho: float) -> np.ndarray:
    """``P_i = rho * Theta_i / sum(Theta)`` over the active bins."""
    return rho * theta.values / theta.values.sum()


def is_estimate(bins, weights, i: int) -> float:
    """Importance-sampling estimate ``(1/N) sum_j 1[bin_j == i] w_j``."""
    bins = np.asarray(bins)
    weights = np.asarray(weights, dtype=float)
    if np.any(weights <= 0) or not np.all(np.isfinite(weights)):
        raise ValueError("weights must be positive and finite")
    if bins.size == 0:
        return 0.0
    return float(np.sum(weights[bins == i]) / bins.size)


def failure_prob(est: DistributionEstimate, m_star: int) -> float:
    """Mass of bins ``m_star..m``."""
    if not 1 <= m_star <= est.grid.m:
        raise ValueError(f"m_star={m_star} outside 1..{est.grid.m}")
    return est.tail(m_star)


@dataclass
class MMCIterationRecord:
    iteration: int
    counts: np.ndarray
    theta_before: ThetaTable
    theta_after: ThetaTable
    n_samples: int
    accept_rate: float


@dataclass
class MMCResult:
    theta: ThetaTable
    samples: ChainSamples
    records: list[MMCIterationRecord] = field(default_factory=list)


def initial_samples(problem: ProblemDefinition, grid: BinGrid, lo: int, n: int,
                    rng: np.random.Generator, counter: EvalCounter | None = None,
                    max_attempts: int = 100_000) -> ChainSamples:
    """Draw ``n`` prior samples, continuing in batches until one lies in bins ``lo..m``.

    Returns only the in-domain draws.
    """
    drawn = 0
    while drawn < max_attempts:
        batch = min(n, max_attempts - drawn) if drawn else n
        x = problem.sample_prior(batch, rng)
        y = problem.evaluate_batch(x, counter)
        b = grid.indices(y)
        drawn += batch
        keep = b >= lo
        if keep.any():
            return ChainSamples(x[keep], y[keep], b[keep], 1.0, int(keep.sum()))
    raise InitializationError(
        f"no prior draw landed in bins {lo}..{grid.m} after {drawn} attempts"
    )


def draw_biased(problem: ProblemDefinition, grid: BinGrid, theta: ThetaTable, n: int,
                previous: ChainSamples, rng: np.random.Generator,
                counter: EvalCounter | None = None,
                proposal: ProposalSpec = ProposalSpec(), burn_in: int = 0) -> ChainSamples:
    """About ``n`` samples from ``q ∝ pi / Theta``, one chain per occupied bin of ``previous``."""
    target = theta.target(problem, grid)
    inside = previous.bins >= theta.lo
    if not inside.any():
        raise InitializationError("no seed inside the active bins")
    rows = np.flatnonzero(inside)[select_seeds(previous.bins[inside], rng)]
    steps = math.ceil(n / len(rows))
    seeds = (previous.x[rows], previous.y[rows], previous.bins[rows])
    return multi_chain_sample(seeds, steps, target, proposal, rng, counter, burn_in=burn_in)


def mmc_iterate(problem: ProblemDefinition, grid: BinGrid, theta0: ThetaTable, n: int, K: int,
                rng: np.random.Generator, counter: EvalCounter | None = None,
                seeds: ChainSamples | None = None,
                proposal: ProposalSpec = ProposalSpec(), burn_in: int = 0) -> MMCResult:
    """``K`` rounds of (draw ~n samples from ``q_k``, update Theta).

    Without ``seeds`` the first round uses ``n`` independent prior draws, which
    are exact samples of ``q_0`` when ``theta0`` is uniform; otherwise they only
    seed the chains. With ``K=0`` one batch is drawn from ``q_0`` and
    ``theta0`` is returned unchanged. ``burn_in`` discarded steps precede
    every chained draw.
    """
    if n < 1 or K < 0:
        raise ValueError("need n >= 1 and K >= 0")
    lo = theta0.lo
    theta = theta0
    pending = None
    if seeds is None:
        seeds = initial_samples(problem, grid, lo, n, rng, counter)
        if np.allclose(theta0.values, theta0.values[0]) and len(seeds) > 1:
            pending = seeds

    records: list[MMCIterationRecord] = []
    samples = seeds
    for k in range(max(K, 1)):
        if pending is not None:
            samples, pending = pending, None
        else:
            samples = draw_biased(problem, grid, theta, n, samples, rng, counter, proposal,
                                  burn_in)
        if K == 0:
            break
        counts, _ = histogram(grid, samples.y)
        counts = counts[lo - 1:]
        new = update_theta(theta, counts, len(samples))
        records.append(MMCIterationRecord(k, counts, theta, new, len(samples),
                                          samples.accept_rate))
        theta = new
    return MMCResult(theta, samples, records)


def run_mmc(problem: ProblemDefinition, grid: BinGrid, m_star: int, n: int, K: int,
            rng: np.random.Generator, counter: EvalCounter | None = None,
            proposal: ProposalSpec = ProposalSpec(),
            burn_in: int = 0) -> tuple[DistributionEstimate, float, MMCResult]:
    """Standalone MMC over the whole grid, taking the interval mass as one.

    Returns the per-bin estimate, the failure probability and the raw result.
    """
    res = mmc_iterate(problem, grid, ThetaTable.uniform(1, grid.m), n, K, rng, counter,
                      proposal=proposal, burn_in=burn_in)
    est = DistributionEstimate.from_probs(grid, bin_probs_from_theta(res.theta, 1.0))
    return est, failure_prob(est, m_star), res
