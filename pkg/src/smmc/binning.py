"""Output-space bins, histogram tallies and PDF/CCDF reconstruction.

Bins are numbered 1..m. Bin ``i`` covers ``[left_i, left_i + delta)``; the last
bin is also closed at ``b``. Integer index arrays use 0 for "outside [a, b]".
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

CSV_HEADER = ("bin_center", "bin_left", "prob", "pdf", "ccdf")


class AlignmentError(ValueError):
    """Threshold does not fall on a bin edge."""


class ResolutionError(ValueError):
    """Requested tail level lies below what an estimate resolves."""


@dataclass(frozen=True)
class BinGrid:
    a: float
    b: float
    m: int

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError(f"need a < b, got [{self.a}, {self.b}]")
        if int(self.m) != self.m or self.m < 2:
            raise ValueError(f"need an integer bin count m >= 2, got {self.m}")
        object.__setattr__(self, "m", int(self.m))

    @property
    def delta(self) -> float:
        return (self.b - self.a) / self.m

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(self.a, self.b, self.m + 1)

    @property
    def lefts(self) -> np.ndarray:
        return self.edges[:-1]

    @property
    def centers(self) -> np.ndarray:
        return self.a + (np.arange(1, self.m + 1) - 0.5) * self.delta

    def left_edge(self, i: int) -> float:
        return float(self.edges[i - 1])

    def indices(self, ys) -> np.ndarray:
        """Vectorized bin numbers, 0 where ``y`` is outside ``[a, b]``."""
        ys = np.asarray(ys, dtype=float)
        idx = np.searchsorted(self.edges, ys, side="right")
        idx = np.where(ys == self.b, self.m, idx)
        return np.where((ys < self.a) | (ys > self.b) | np.isnan(ys), 0, idx).astype(np.int64)


def bin_index(grid: BinGrid, y: float) -> int | None:
    """Bin number containing ``y``, or None outside ``[a, b]``."""
    i = int(grid.indices(y))
    return i or None


def align_threshold(grid: BinGrid, y_star: float, rtol: float = 1e-9) -> int:
    """Bin ``m*`` whose left edge is ``y_star``."""
    if not y_star < grid.b:
        raise AlignmentError(f"threshold {y_star} must lie below b={grid.b}")
    offset = (y_star - grid.a) / grid.delta
    k = round(offset)
    if k < 0 or abs(offset - k) > rtol * max(1.0, abs(offset)):
        raise AlignmentError(
            f"threshold {y_star} is not on a bin edge of [{grid.a}, {grid.b}] with "
            f"m={grid.m} (offset {offset:.6g} bins); adjust a, b or m"
        )
    return int(k) + 1


def histogram(grid: BinGrid, ys) -> tuple[np.ndarray, int]:
    """Counts per bin (length m) and the number of values outside ``[a, b]``."""
    idx = grid.indices(np.ravel(ys))
    counts = np.bincount(idx, minlength=grid.m + 1)
    return counts[1:], int(counts[0])


def quantile(values, p: float) -> float:
    """Order statistic of rank ``ceil(p * N)`` (no interpolation)."""
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        raise ValueError("quantile of an empty sample")
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    # round() absorbs products like 0.9 * 100 = 90.00000000000001
    rank = max(1, math.ceil(round(p * values.size, 9)))
    return float(np.partition(values, rank - 1)[rank - 1])


@dataclass(frozen=True)
class DistributionEstimate:
    """Per-bin probabilities ``probs[i-1] = P(y in bin i)`` with total ``rho``."""

    grid: BinGrid
    probs: np.ndarray
    rho: float

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.shape != (self.grid.m,):
            raise ValueError(f"probs must have length {self.grid.m}")
        if np.any(probs < 0):
            raise ValueError("bin probabilities must be nonnegative")
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "rho", float(self.rho))

    @classmethod
    def from_probs(cls, grid: BinGrid, probs) -> "DistributionEstimate":
        probs = np.asarray(probs, dtype=float)
        return cls(grid, probs, float(probs.sum()))

    def pdf(self) -> np.ndarray:
        return self.probs / self.grid.delta

    def ccdf(self) -> np.ndarray:
        return np.cumsum(self.probs[::-1])[::-1]

    def tail(self, m_star: int) -> float:
        return float(self.probs[m_star - 1:].sum())


def pdf_from_probs(est: DistributionEstimate) -> list[tuple[float, float]]:
    return list(zip(est.grid.centers.tolist(), est.pdf().tolist()))


def ccdf_from_probs(est: DistributionEstimate) -> list[tuple[float, float]]:
    return list(zip(est.grid.lefts.tolist(), est.ccdf().tolist()))


def write_csv(est: DistributionEstimate, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = zip(est.grid.centers, est.grid.lefts, est.probs, est.pdf(), est.ccdf())
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for row in rows:
            w.writerow([f"{v:.17e}" for v in row])
    return path


def read_csv(path) -> DistributionEstimate:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != CSV_HEADER:
            raise ValueError(f"unexpected header {header}")
        data = np.array([[float(v) for v in row] for row in reader])
    centers, lefts, probs = data[:, 0], data[:, 1], data[:, 2]
    m = len(probs)
    delta = 2.0 * (centers[0] - lefts[0])
    grid = BinGrid(float(lefts[0]), float(lefts[0] + m * delta), m)
    return DistributionEstimate.from_probs(grid, probs)
