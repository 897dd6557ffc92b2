"""Subset simulation baseline.

Level 0 samples the prior. Each later level runs modified-Metropolis chains
conditioned on ``f(x) > y_k``, seeded by the previous level's samples above
the new threshold. Thresholds are ``(1 - gamma)`` sample quantiles, clipped
to the failure threshold on the last level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .binning import quantile
from .kernel import ProposalSpec, TargetSpec, multi_chain_sample
from .problem import EvalCounter, ProblemDefinition


class DegenerateLevelError(RuntimeError):
    """No sample exceeded an intermediate threshold."""


class SSConvergenceError(RuntimeError):
    def __init__(self, msg, partial: "SSResult"):
        super().__init__(msg)
        self.partial = partial


@dataclass(frozen=True)
class SSConfig:
    gamma: float = 0.1
    n_per_level: int = 1000
    max_levels: int = 40
    proposal_width: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        if self.n_per_level * self.gamma < 1:
            raise ValueError("n_per_level * gamma must be at least 1")


@dataclass
class SSResult:
    thresholds: list[float] = field(default_factory=list)
    cond_probs: list[float] = field(default_factory=list)
    p_f: float = 1.0
    total_evals: int = 0


def run_ss(problem: ProblemDefinition, config: SSConfig, rng: np.random.Generator,
           counter: EvalCounter | None = None) -> SSResult:
    counter = counter if counter is not None else EvalCounter()
    start = counter.count
    y_star = problem.threshold
    N = config.n_per_level
    chain_len = math.ceil(1.0 / config.gamma)
    proposal = ProposalSpec(config.proposal_width)
    result = SSResult()

    x = problem.sample_prior(N, rng)
    y = problem.evaluate_batch(x, counter)

    def finish():
        result.p_f = float(np.prod(result.cond_probs))
        result.total_evals = counter.count - start
        return result

    for _ in range(config.max_levels):
        y_next = quantile(y, 1.0 - config.gamma)
        if y_next >= y_star:
            result.thresholds.append(y_star)
            result.cond_probs.append(float(np.mean(y > y_star)))
            return finish()
        above = y > y_next
        if not above.any():
            raise DegenerateLevelError(
                f"no sample above intermediate threshold {y_next:g}; increase n_per_level")
        result.thresholds.append(float(y_next))
        result.cond_probs.append(float(np.mean(above)))

        target = TargetSpec(problem, y_min=y_next)
        ones = np.ones(int(above.sum()), dtype=np.int64)
        chains = multi_chain_sample((x[above], y[above], ones), chain_len - 1, target,
                                    proposal, rng, counter)
        # each seed heads its own chain
        c = chains.n_chains
        xs = chains.x.reshape(c, chain_len - 1, -1)
        ys = chains.y.reshape(c, chain_len - 1)
        x = np.concatenate([x[above][:, None, :], xs], axis=1).reshape(c * chain_len, -1)
        y = np.concatenate([y[above][:, None], ys], axis=1).reshape(c * chain_len)

    finish()
    raise SSConvergenceError(f"threshold {y_star} not reached in {config.max_levels} levels",
                             result)
