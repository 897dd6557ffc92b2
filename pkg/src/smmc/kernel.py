"""Modified Metropolis kernel for targets ``pi(x) / Theta(f(x))`` on a bin domain.

Chains are advanced in lockstep as one vectorized batch. Each step:

1. propose every component from a symmetric uniform window;
2. accept each component against its own marginal density ratio;
3. evaluate ``f`` at the candidate (skipped when no component moved), reject
   it outside the active bins, otherwise accept with ``min(1, Theta(x)/Theta(zeta))``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .binning import BinGrid
from .problem import EvalCounter, ProblemDefinition

logger = logging.getLogger(__name__)

ACCEPT_BAND = (0.05, 0.95)


class DomainError(ValueError):
    """A chain state lies outside the target domain."""


@dataclass(frozen=True)
class ProposalSpec:
    """Per-dimension uniform window ``[x_i - width, x_i + width]``."""

    width: float | np.ndarray = 1.0

    def __post_init__(self):
        if np.any(np.asarray(self.width) <= 0):
            raise ValueError("proposal half-width must be positive")


@dataclass(frozen=True)
class TargetSpec:
    """Biased target restricted to bins ``lo..m`` of ``grid``.

    ``log_theta`` holds ``log Theta_i`` for bins ``lo..m`` (length ``m-lo+1``).
    With ``grid=None`` Theta is constant and the domain is ``f(x) > y_min``
    (all of R^d by default). ``y_min`` also applies on top of a grid.
    """

    problem: ProblemDefinition
    grid: BinGrid | None = None
    lo: int = 1
    log_theta: np.ndarray | None = None
    y_min: float = -np.inf

    def __post_init__(self):
        if self.grid is None:
            return
        if not 1 <= self.lo <= self.grid.m:
            raise ValueError(f"active start bin {self.lo} outside 1..{self.grid.m}")
        n_active = self.grid.m - self.lo + 1
        lt = np.zeros(n_active) if self.log_theta is None else np.asarray(self.log_theta, float)
        if lt.shape != (n_active,):
            raise ValueError(f"log_theta must have {n_active} entries")
        if not np.all(np.isfinite(lt)):
            raise ValueError("Theta must be strictly positive and finite on the domain")
        object.__setattr__(self, "log_theta", lt)

    def bins(self, ys) -> np.ndarray:
        if self.grid is None:
            return np.ones(np.shape(ys), dtype=np.int64)
        return self.grid.indices(ys)

    def in_domain(self, bins, ys) -> np.ndarray:
        return (np.asarray(bins) >= self.lo) & (np.asarray(ys) > self.y_min)

    def log_weight(self, bins) -> np.ndarray:
        """``log Theta`` of in-domain bins."""
        if self.grid is None:
            return np.zeros(np.shape(bins))
        return self.log_theta[np.asarray(bins) - self.lo]


@dataclass
class ChainState:
    current: np.ndarray
    current_y: float
    current_bin: int


@dataclass
class ChainSamples:
    """Stacked chain output, chain-major: rows ``c*steps .. (c+1)*steps-1`` are chain ``c``."""

    x: np.ndarray
    y: np.ndarray
    bins: np.ndarray
    accept_rate: float
    n_chains: int

    def __len__(self) -> int:
        return len(self.y)


def _step_batch(X, Y, B, target: TargetSpec, prop: ProposalSpec, rng, counter):
    """Advance every row of ``X`` by one kernel step. Returns new arrays and accept mask."""
    problem = target.problem
    n, d = X.shape
    width = np.broadcast_to(np.asarray(prop.width, dtype=float), (d,))
    xi = X + width * rng.uniform(-1.0, 1.0, size=(n, d))
    log_u = np.log(rng.random(size=(n, d)))
    log_u_final = np.log(rng.random(size=n))

    log_r = problem.marginal_logpdf(xi) - problem.marginal_logpdf(X)
    take = log_u < log_r
    moved = take.any(axis=1)

    accepted = np.zeros(n, dtype=bool)
    if not moved.any():
        return X, Y, B, accepted

    zeta = np.where(take[moved], xi[moved], X[moved])
    y_new = problem.evaluate_batch(zeta, counter)
    b_new = target.bins(y_new)
    ok = target.in_domain(b_new, y_new)
    log_r_star = np.full(len(zeta), -np.inf)
    log_r_star[ok] = target.log_weight(B[moved][ok]) - target.log_weight(b_new[ok])
    acc = ok & (log_u_final[moved] < log_r_star)

    rows = np.flatnonzero(moved)[acc]
    X = X.copy()
    Y = Y.copy()
    B = B.copy()
    X[rows] = zeta[acc]
    Y[rows] = y_new[acc]
    B[rows] = b_new[acc]
    accepted[rows] = True
    return X, Y, B, accepted


def _check_states(X, Y, B, target: TargetSpec):
    if X.ndim != 2 or X.shape[1] != target.problem.dim:
        raise DomainError(f"states must be (n, {target.problem.dim})")
    if not np.all(target.in_domain(B, Y)):
        raise DomainError("chain state outside the target domain")


def mm_step(state: ChainState, target: TargetSpec, prop: ProposalSpec,
            rng: np.random.Generator, counter: EvalCounter | None = None) -> ChainState:
    """One modified-Metropolis step for a single chain."""
    X = np.asarray(state.current, float)[None, :]
    Y = np.array([state.current_y], float)
    B = np.array([state.current_bin], np.int64)
    _check_states(X, Y, B, target)
    X, Y, B, _ = _step_batch(X, Y, B, target, prop, rng, counter)
    return ChainState(X[0].copy(), float(Y[0]), int(B[0]))


def select_seeds(bins, rng: np.random.Generator) -> np.ndarray:
    """Row indices of one uniformly chosen sample per occupied bin, ordered by bin."""
    bins = np.asarray(bins)
    if bins.size == 0:
        raise ValueError("cannot select seeds from an empty sample")
    perm = rng.permutation(bins.size)
    _, first = np.unique(bins[perm], return_index=True)
    return perm[first]


def states_from_samples(samples: ChainSamples, rows) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    rows = np.asarray(rows)
    return samples.x[rows], samples.y[rows], samples.bins[rows]


def multi_chain_sample(seeds, steps_per_chain: int, target: TargetSpec, prop: ProposalSpec,
                       rng: np.random.Generator, counter: EvalCounter | None = None,
                       burn_in: int = 0) -> ChainSamples:
    """Run one chain per seed for ``steps_per_chain`` recorded steps.

    ``seeds`` is either a list of :class:`ChainState` or a tuple ``(X, Y, B)``
    of stacked arrays. Rejected moves repeat the current state in the output.
    """
    if steps_per_chain < 1:
        raise ValueError("steps_per_chain must be >= 1")
    if isinstance(seeds, tuple):
        X, Y, B = (np.asarray(a) for a in seeds)
        X = X.astype(float)
    else:
        if not seeds:
            raise ValueError("no seeds")
        X = np.stack([np.asarray(s.current, float) for s in seeds])
        Y = np.array([s.current_y for s in seeds], float)
        B = np.array([s.current_bin for s in seeds], np.int64)
    _check_states(X, Y, B, target)

    for _ in range(burn_in):
        X, Y, B, _ = _step_batch(X, Y, B, target, prop, rng, counter)

    c, d = X.shape
    xs = np.empty((steps_per_chain, c, d))
    ys = np.empty((steps_per_chain, c))
    bs = np.empty((steps_per_chain, c), dtype=np.int64)
    n_acc = 0
    for t in range(steps_per_chain):
        X, Y, B, acc = _step_batch(X, Y, B, target, prop, rng, counter)
        xs[t], ys[t], bs[t] = X, Y, B
        n_acc += int(acc.sum())

    total = c * steps_per_chain
    rate = n_acc / total
    if total >= 10_000 and not ACCEPT_BAND[0] <= rate <= ACCEPT_BAND[1]:
        logger.warning("modified Metropolis acceptance rate %.3f outside %s", rate, ACCEPT_BAND)
    return ChainSamples(
        x=xs.transpose(1, 0, 2).reshape(total, d),
        y=ys.T.reshape(total),
        bins=bs.T.reshape(total),
        accept_rate=rate,
        n_chains=c,
    )
