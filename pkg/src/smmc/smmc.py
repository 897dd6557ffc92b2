"""Subset multicanonical Monte Carlo.

MMC is run on a shrinking sequence of output intervals ``[left(m_j), b]``.
After each subset the next start bin is placed at the ``(1 - alpha)``
quantile of the final MMC samples, the weights above it are handed over,
and the interval mass ``rho`` is carried along as the running product of
estimated tail fractions. The failure probability is the mass of the
interval that starts at the threshold bin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .binning import BinGrid, DistributionEstimate, quantile
from .kernel import ChainSamples, ProposalSpec
from .mmc import MMCResult, ThetaTable, bin_probs_from_theta, mmc_iterate
from .problem import EvalCounter, ProblemDefinition


class ConvergenceError(RuntimeError):
    """Subset loop did not reach the threshold bin within the allowed subsets."""

    def __init__(self, msg, trace=None):
        super().__init__(msg)
        self.trace = trace or []


@dataclass(frozen=True)
class SMMCConfig:
    alpha: float = 0.2
    n: int = 5000
    K: int = 5
    max_subsets: int = 50
    proposal_width: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.n * self.alpha < 10:
            raise ValueError("n * alpha must be at least 10")
        if self.K < 1:
            raise ValueError("K must be >= 1")


@dataclass
class SubsetState:
    j: int
    m_j: int
    rho_j: float
    theta: ThetaTable
    probs: np.ndarray
    evals: int = 0

    def to_dict(self) -> dict:
        return {
            "j": self.j,
            "m_j": self.m_j,
            "rho_j": self.rho_j,
            "theta": self.theta.values.tolist(),
            "bin_probs": self.probs.tolist(),
            "evals": self.evals,
        }


@dataclass
class SMMCResult:
    estimate: DistributionEstimate
    p_f: float
    trace: list[SubsetState] = field(default_factory=list)
    m_star: int = 1

    @property
    def n_subsets(self) -> int:
        return len(self.trace)


def select_next_cutoff(final_y, alpha: float, grid: BinGrid, m_j: int, m_star: int) -> int:
    """Start bin of the next subset: the bin of the ``(1-alpha)`` sample quantile.

    Clipped to ``m_star`` and forced to advance at least one bin.
    """
    y_alpha = quantile(final_y, 1.0 - alpha)
    m_next = int(grid.indices(y_alpha))
    if m_next == 0:
        m_next = grid.m if y_alpha > grid.b else m_j
    m_next = max(m_next, m_j + 1)
    return min(m_next, m_star)


def remap_theta(theta: ThetaTable, m_next: int) -> ThetaTable:
    """Restrict the table to bins ``m_next..m`` and renormalize."""
    if not theta.lo <= m_next <= theta.hi:
        raise ValueError(f"cutoff {m_next} outside {theta.lo}..{theta.hi}")
    return ThetaTable(m_next, theta.values[m_next - theta.lo:])


def run_smmc(problem: ProblemDefinition, grid: BinGrid, m_star: int, config: SMMCConfig,
             rng: np.random.Generator, counter: EvalCounter | None = None) -> SMMCResult:
    """Estimate the bin masses down to bin ``m_star`` and ``P_F = rho_J``.

    The returned estimate covers every bin: bins below the last cutoff keep the
    values from the subset that last sampled them, bins at or above it come
    from the final subset.
    """
    counter = counter if counter is not None else EvalCounter()
    if not 1 <= m_star <= grid.m:
        raise ValueError(f"m_star={m_star} outside 1..{grid.m}")
    proposal = ProposalSpec(config.proposal_width)

    probs = np.zeros(grid.m)
    theta = ThetaTable.uniform(1, grid.m)
    m_j, rho_j = 1, 1.0
    probs[:] = bin_probs_from_theta(theta, rho_j)
    seeds: ChainSamples | None = None
    trace: list[SubsetState] = []

    j = 0
    while m_j < m_star:
        if j >= config.max_subsets:
            raise ConvergenceError(
                f"no convergence to bin {m_star} after {j} subsets (at bin {m_j})", trace)
        start = counter.count
        res: MMCResult = mmc_iterate(problem, grid, theta, config.n, config.K, rng, counter,
                                     seeds=seeds, proposal=proposal)
        p_active = bin_probs_from_theta(res.theta, rho_j)
        probs[m_j - 1:] = p_active
        trace.append(SubsetState(j, m_j, rho_j, res.theta, p_active, counter.count - start))

        m_next = select_next_cutoff(res.samples.y, config.alpha, grid, m_j, m_star)
        rho_j = float(p_active[m_next - m_j:].sum())
        theta = remap_theta(res.theta, m_next)
        keep = res.samples.bins >= m_next
        seeds = _subsample(res.samples, keep)
        m_j = m_next
        j += 1

    est = DistributionEstimate.from_probs(grid, probs)
    return SMMCResult(est, rho_j, trace, m_star)


def _subsample(samples: ChainSamples, keep) -> ChainSamples | None:
    if not np.any(keep):
        return None
    return ChainSamples(samples.x[keep], samples.y[keep], samples.bins[keep],
                        samples.accept_rate, int(np.sum(keep)))


def mse_optimal_phi(N: int, m: int, m_star: int) -> tuple[float, float]:
    """Optimal interval-mass scaling and the minimal-MSE factor under a flat bias.

    With ``r = m - m_star - 1`` and ``N`` independent samples, the relative MSE
    of a bin estimate is ``r/N * phi**2 + (phi - 1)**2``, minimized at
    ``phi = N / (N + r)`` where it equals ``r / (r + N)``.
    """
    if N <= 0:
        raise ValueError("N must be positive")
    if m <= m_star:
        raise ValueError("need m > m_star")
    r = m - m_star - 1
    return N / (N + r), r / (r + N)


def mse_model(phi: float, N: int, m: int, m_star: int) -> float:
    """Relative MSE ``MSE / P_j**2`` of the flat-bias bin estimator at scaling ``phi``."""
    r = m - m_star - 1
    return r / N * phi**2 + (phi - 1.0) ** 2


def simulate_flat_estimator(N: int, n_bins: int, phi: float, trials: int,
                            rng: np.random.Generator) -> np.ndarray:
    """Relative estimates ``P_hat / P`` of one bin under a perfectly flat bias.

    Each trial draws ``N`` independent samples spread evenly over ``n_bins``
    bins (``n_bins = m - m_star`` in the MSE model) and weights the hits of
    the bin of interest by ``n_bins * phi * P``.
    """
    if N <= 0 or n_bins < 1 or trials < 1:
        raise ValueError("need N > 0, n_bins >= 1 and trials >= 1")
    hits = rng.binomial(N, 1.0 / n_bins, size=trials)
    return n_bins * phi * hits / N
