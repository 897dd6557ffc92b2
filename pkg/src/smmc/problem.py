"""Failure problem definition: input prior, performance function, threshold."""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


class DimensionError(ValueError):
    """Input vector does not match the problem dimension."""


class StandardNormal:
    """Standard normal marginal, evaluated without scipy overhead."""

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        return -0.5 * x * x - LOG_SQRT_2PI

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return rng.standard_normal(size)

    def __repr__(self) -> str:
        return "StandardNormal()"


class CustomMarginal:
    """Marginal built from a log-density and a sampler.

    ``logpdf(x)`` must accept arrays and return ``-inf`` where the density is
    zero. ``sampler(rng, size)`` must draw from the same law.
    """

    def __init__(self, logpdf: Callable, sampler: Callable):
        self._logpdf = logpdf
        self._sampler = sampler

    @classmethod
    def from_scipy(cls, frozen) -> "CustomMarginal":
        return cls(frozen.logpdf, lambda rng, size: frozen.rvs(size=size, random_state=rng))

    def logpdf(self, x):
        with np.errstate(divide="ignore"):
            return np.asarray(self._logpdf(np.asarray(x, dtype=float)), dtype=float)

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return np.asarray(self._sampler(rng, size), dtype=float)


class EvalCounter:
    """Thread-safe tally of performance-function evaluations."""

    def __init__(self, count: int = 0):
        self._count = int(count)
        self._lock = threading.Lock()

    @property
    def count(self) -> int:
        return self._count

    def add(self, k: int) -> None:
        if k < 0:
            raise ValueError("evaluation count increment must be nonnegative")
        with self._lock:
            self._count += int(k)

    def __repr__(self) -> str:
        return f"EvalCounter({self._count})"


@dataclass(frozen=True)
class ProblemDefinition:
    """A failure problem ``P(f(x) > threshold)`` under an independent prior.

    Parameters
    ----------
    dim : int
        Input dimension.
    perform : callable
        Vectorized performance function mapping an ``(n, dim)`` array to ``n``
        scalar outputs.
    marginals : sequence
        One marginal per input component; each provides ``logpdf`` and
        ``sample(rng, size)``.
    threshold : float
        Failure threshold ``y*``.
    name : str
        Label used by the benchmark registry and reports.
    """

    dim: int
    perform: Callable[[np.ndarray], np.ndarray]
    marginals: Sequence = field(repr=False)
    threshold: float
    name: str = "custom"

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if len(self.marginals) != self.dim:
            raise ValueError(
                f"expected {self.dim} marginals, got {len(self.marginals)}"
            )
        object.__setattr__(self, "marginals", tuple(self.marginals))

    @property
    def _shared_marginal(self):
        first = self.marginals[0]
        if all(m is first for m in self.marginals):
            return first
        return None

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.dim,):
            raise DimensionError(
                f"input has trailing shape {x.shape[-1:]}, problem dim is {self.dim}"
            )
        return x

    def evaluate(self, x, counter: EvalCounter | None = None) -> float:
        """Performance value of a single input vector."""
        x = self._check(x)
        if x.ndim != 1:
            raise DimensionError("evaluate takes one vector; use evaluate_batch")
        return float(self.evaluate_batch(x[None, :], counter)[0])

    def evaluate_batch(self, xs, counter: EvalCounter | None = None) -> np.ndarray:
        xs = self._check(xs)
        if xs.ndim != 2:
            raise DimensionError("evaluate_batch takes an (n, dim) array")
        ys = np.asarray(self.perform(xs), dtype=float).reshape(len(xs))
        if counter is not None:
            counter.add(len(xs))
        return ys

    def marginal_logpdf(self, xs) -> np.ndarray:
        """Per-component log densities, same shape as ``xs``."""
        xs = self._check(xs)
        shared = self._shared_marginal
        if shared is not None:
            return np.asarray(shared.logpdf(xs), dtype=float)
        out = np.empty(xs.shape)
        for i, marg in enumerate(self.marginals):
            out[..., i] = marg.logpdf(xs[..., i])
        return out

    def prior_log_density(self, x) -> float | np.ndarray:
        """Sum of marginal log densities; ``-inf`` where any density is zero."""
        lp = self.marginal_logpdf(x).sum(axis=-1)
        return float(lp) if np.ndim(lp) == 0 else lp

    def sample_prior(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if n < 1:
            raise ValueError("n must be >= 1")
        shared = self._shared_marginal
        if shared is not None:
            return np.asarray(shared.sample(rng, (n, self.dim)), dtype=float)
        return np.column_stack([m.sample(rng, n) for m in self.marginals])


def standard_normal_problem(perform, dim: int, threshold: float, name: str = "custom"):
    """Problem with i.i.d. standard normal inputs."""
    marg = StandardNormal()
    return ProblemDefinition(dim, perform, [marg] * dim, threshold, name)


def evaluate(problem: ProblemDefinition, x, counter: EvalCounter | None = None) -> float:
    return problem.evaluate(x, counter)


def prior_log_density(problem: ProblemDefinition, x):
    return problem.prior_log_density(x)


def sample_prior(problem: ProblemDefinition, n: int, rng: np.random.Generator) -> np.ndarray:
    return problem.sample_prior(n, rng)
