"""Benchmark problems and their reference values.

* ``two-circle``: 2-d standard normal input, failure when the point is within
  unit distance of (8, 2) or (-8, 2).
* ``norm10``: squared norm of a 10-d standard normal vector above 75.
* ``quarter-car``: peak suspension stroke of a nonlinear quarter-car model
  driven by 100 white-noise road inputs.
* ``gauss1d``: ``f(x) = x`` for a scalar standard normal, a cheap sanity case.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, special

from .binning import BinGrid
from .problem import ProblemDefinition, standard_normal_problem

RIGHT_CENTER = np.array([8.0, 2.0])
LEFT_CENTER = np.array([-8.0, 2.0])


class OracleError(RuntimeError):
    """A reference computation missed its accuracy target."""


# -- two circles -------------------------------------------------------------

def two_circle_perform(x) -> np.ndarray | float:
    """Negative distance to the nearer disk center; failure is ``f > -1``."""
    x = np.asarray(x, dtype=float)
    dr = np.linalg.norm(x - RIGHT_CENTER, axis=-1)
    dl = np.linalg.norm(x - LEFT_CENTER, axis=-1)
    out = -np.minimum(dr, dl)
    return float(out) if out.ndim == 0 else out


def disk_probability(center=RIGHT_CENTER, radius: float = 1.0, rtol: float = 1e-10) -> float:
    """Standard bivariate normal mass of a disk, by 2-d quadrature in polar coordinates.

    The factor ``exp(-|c|^2/2)`` is pulled out so the integrand is O(1).
    """
    c = np.asarray(center, dtype=float)
    if radius <= 0:
        return 0.0
    c2 = float(c @ c)

    def integrand(theta, r):
        u1, u2 = r * math.cos(theta), r * math.sin(theta)
        return math.exp(-(c[0] * u1 + c[1] * u2) - 0.5 * r * r) * r

    val, err = integrate.dblquad(integrand, 0.0, radius, 0.0, 2.0 * math.pi,
                                 epsabs=0.0, epsrel=rtol)
    if err > 1e3 * rtol * abs(val):
        raise OracleError(f"disk quadrature error {err:g} too large for value {val:g}")
    return math.exp(-0.5 * c2) * val / (2.0 * math.pi)


def two_circle_exact_pf(radius: float = 1.0) -> float:
    """Failure probability of the two-circle problem. The disks are disjoint and mirror images."""
    return 2.0 * disk_probability(RIGHT_CENTER, radius)


# -- squared norm ------------------------------------------------------------

def norm_squared_perform(x) -> np.ndarray | float:
    x = np.asarray(x, dtype=float)
    out = np.sum(x * x, axis=-1)
    return float(out) if out.ndim == 0 else out


def chi2_tail(d: int, t: float) -> float:
    """``P(chi2_d > t)`` via the regularized upper incomplete gamma function."""
    if d < 1:
        raise ValueError("degrees of freedom must be >= 1")
    if t <= 0:
        return 1.0
    return float(special.gammaincc(d / 2.0, t / 2.0))


def chi2_tail_even(d: int, t: float) -> float:
    """Poisson-sum form of the chi-square tail, valid for even ``d``."""
    if d % 2:
        raise ValueError("closed form needs even d")
    h = t / 2.0
    return math.exp(-h) * sum(h**k / math.factorial(k) for k in range(d // 2))


# -- quarter car -------------------------------------------------------------

@dataclass(frozen=True)
class QuarterCarParams:
    m_s: float = 20.0
    m_u: float = 40.0
    k_s: float = 400.0
    k_u: float = 2000.0
    c: float = 600.0
    sigma: float = 0.05
    T: float = 1.0
    steps: int = 100

    def __post_init__(self):
        if min(self.m_s, self.m_u, self.k_s, self.k_u) <= 0 or self.c < 0:
            raise ValueError("masses and stiffnesses must be positive, damping nonnegative")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")

    @property
    def dt(self) -> float:
        return self.T / self.steps


def quarter_car_rhs(state: np.ndarray, z, p: QuarterCarParams) -> np.ndarray:
    """Time derivative of ``(x1, v1, x2, v2)`` along the last axis."""
    x1, v1, x2, v2 = np.moveaxis(state, -1, 0)
    rel = x1 - x2
    f_spring = p.k_s * rel**3 + p.c * (v1 - v2)
    a1 = -f_spring / p.m_s
    a2 = (f_spring + p.k_u * (z - x2)) / p.m_u
    return np.stack([v1, a1, v2, a2], axis=-1)


def rk4_step(state, z, dt: float, p: QuarterCarParams):
    k1 = quarter_car_rhs(state, z, p)
    k2 = quarter_car_rhs(state + 0.5 * dt * k1, z, p)
    k3 = quarter_car_rhs(state + 0.5 * dt * k2, z, p)
    k4 = quarter_car_rhs(state + dt * k3, z, p)
    return state + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def quarter_car_trajectory(z_path, p: QuarterCarParams = QuarterCarParams(),
                           state0=None, dt: float | None = None) -> np.ndarray:
    """States at every grid point, shape ``(..., steps + 1, 4)``.

    ``z_path`` holds the road displacement for each step, held constant over
    the step; its last axis is time.
    """
    z_path = np.asarray(z_path, dtype=float)
    n_steps = z_path.shape[-1]
    dt = p.dt if dt is None else dt
    batch = z_path.shape[:-1]
    state = np.zeros(batch + (4,)) if state0 is None else np.broadcast_to(
        np.asarray(state0, float), batch + (4,)).copy()
    out = np.empty(batch + (n_steps + 1, 4))
    out[..., 0, :] = state
    for k in range(n_steps):
        state = rk4_step(state, z_path[..., k], dt, p)
        out[..., k + 1, :] = state
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("quarter-car integration produced non-finite values")
    return out


def quarter_car_perform(xi, p: QuarterCarParams = QuarterCarParams()):
    """Peak ``|x1 - x2|`` over ``[0, T]`` for standard normal road inputs ``xi``.

    The road displacement on step ``k`` is ``sigma * xi[k]``.
    """
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-1] != p.steps:
        raise ValueError(f"expected {p.steps} road inputs, got {xi.shape[-1]}")
    traj = quarter_car_trajectory(p.sigma * xi, p)
    out = np.max(np.abs(traj[..., 0] - traj[..., 2]), axis=-1)
    return float(out) if out.ndim == 0 else out


def quarter_car_energy(state, p: QuarterCarParams) -> np.ndarray:
    """Kinetic plus quartic-spring plus tire energy (road fixed at zero)."""
    x1, v1, x2, v2 = np.moveaxis(np.asarray(state, float), -1, 0)
    return (0.5 * p.m_s * v1**2 + 0.5 * p.m_u * v2**2
            + 0.25 * p.k_s * (x1 - x2) ** 4 + 0.5 * p.k_u * x2**2)


# -- registry ----------------------------------------------------------------

def gauss1d_perform(x):
    return np.asarray(x, dtype=float)[..., 0]


@dataclass(frozen=True)
class Benchmark:
    """A named problem with a default output grid and optional reference ``P_F``."""

    name: str
    build: Callable[[float | None], ProblemDefinition]
    grid: BinGrid
    threshold: float
    reference: Callable[[float], float] | None = field(default=None, repr=False)

    def problem(self, threshold: float | None = None) -> ProblemDefinition:
        return self.build(self.threshold if threshold is None else threshold)

    def ref_pf(self, threshold: float | None = None) -> float | None:
        if self.reference is None:
            return None
        return self.reference(self.threshold if threshold is None else threshold)


def _two_circle_ref(t: float) -> float:
    # f > t  <=>  distance to the nearer center < -t
    return two_circle_exact_pf(-t) if t < 0 else 0.0


def _gauss_tail(t: float) -> float:
    return float(special.ndtr(-t))


def quarter_car_problem(p: QuarterCarParams = QuarterCarParams(), threshold: float = 0.024):
    return standard_normal_problem(lambda x: quarter_car_perform(x, p), p.steps, threshold,
                                   "quarter-car")


BENCHMARKS: dict[str, Benchmark] = {
    "two-circle": Benchmark(
        "two-circle",
        lambda t: standard_normal_problem(two_circle_perform, 2, t, "two-circle"),
        BinGrid(-12.0, 0.0, 120), -1.0, _two_circle_ref),
    "norm10": Benchmark(
        "norm10",
        lambda t: standard_normal_problem(norm_squared_perform, 10, t, "norm10"),
        BinGrid(0.0, 100.0, 100), 75.0, lambda t: chi2_tail(10, t)),
    "quarter-car": Benchmark(
        "quarter-car",
        lambda t: quarter_car_problem(threshold=t),
        BinGrid(0.0, 0.03, 150), 0.024, None),
    "gauss1d": Benchmark(
        "gauss1d",
        lambda t: standard_normal_problem(gauss1d_perform, 1, t, "gauss1d"),
        BinGrid(-5.0, 5.0, 50), 4.0, _gauss_tail),
}


def get_benchmark(name: str) -> Benchmark:
    try:
        return BENCHMARKS[name]
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; choose from {sorted(BENCHMARKS)}") from None


def register(bench: Benchmark) -> None:
    """Add a custom problem to the registry used by the harness and CLI."""
    BENCHMARKS[bench.name] = bench
