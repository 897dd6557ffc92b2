"""Experiment orchestration: configuration, repeated runs, RMSE and result files.

A run is described by a flat mapping of dotted keys (``smmc.alpha``,
``mmc.grid.m``, ...), usually loaded from a YAML file. ``run_experiment``
performs ``L`` independent repetitions, each with its own random stream spawned
from the master seed, and writes

* ``report.json`` -- method, problem, ``L``, mean evaluations, estimates,
  relative RMSE, reference ``P_F``, seed and wall-clock time;
* ``runs.csv`` -- one row per repetition (estimate, evaluation count);
* ``trace_XXX.json`` -- the subset trace of every SMMC repetition.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .benchmarks import get_benchmark
from .binning import BinGrid, DistributionEstimate, ResolutionError, align_threshold, write_csv
from .kernel import ProposalSpec
from .mmc import run_mmc
from .montecarlo import mc_tally, run_mc
from .problem import EvalCounter
from .smmc import SMMCConfig, run_smmc
from .subset_sim import SSConfig, run_ss

logger = logging.getLogger(__name__)

METHODS = ("mc", "ss", "mmc", "smmc")

# Method parameters and their defaults. Grid keys default to the benchmark's grid.
DEFAULTS: dict[str, Any] = {
    "mc.n_samples": 100_000,
    "ss.gamma": 0.1,
    "ss.n_per_level": 1000,
    "ss.max_levels": 40,
    "mmc.k_iters": 10,
    "mmc.n_per_iter": 10_000,
    "mmc.grid.a": None,
    "mmc.grid.b": None,
    "mmc.grid.m": None,
    "smmc.alpha": 0.2,
    "smmc.n_per_iter": 10_000,
    "smmc.k_iters": 5,
    "smmc.max_subsets": 50,
    "kernel.proposal_width": 1.0,
    "kernel.burn_in": 0,
}

# The parameter that sets the sample size of each method (scaled by sweeps).
SIZE_KEY = {
    "mc": "mc.n_samples",
    "ss": "ss.n_per_level",
    "mmc": "mmc.n_per_iter",
    "smmc": "smmc.n_per_iter",
}

TOP_LEVEL = ("problem", "method", "seed", "L", "out_dir", "threshold", "ref_pf", "workers")


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


def flatten(mapping: dict, prefix: str = "") -> dict[str, Any]:
    """Nested dicts to dotted keys; already-dotted keys pass through."""
    out: dict[str, Any] = {}
    for key, value in mapping.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(flatten(value, name + "."))
        else:
            out[name] = value
    return out


@dataclass
class RunConfig:
    """One experiment: a problem, a method with its parameters, a seed and ``L``.

    ``params`` holds the dotted method/grid/kernel keys; missing keys take
    the values in ``DEFAULTS``.
    """

    problem: str
    method: str
    seed: int
    L: int = 20
    out_dir: str = "results"
    threshold: float | None = None
    ref_pf: float | None = None
    workers: int = 1
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {list(METHODS)}")
        try:
            get_benchmark(self.problem)
        except KeyError as exc:
            raise ConfigError(str(exc.args[0])) from None
        if self.seed is None:
            raise ConfigError("a master seed is required")
        if int(self.L) != self.L or self.L < 1:
            raise ConfigError("L must be a positive integer")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        unknown = set(self.params) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        self.seed = int(self.seed)
        self.L = int(self.L)
        self.params = {**DEFAULTS, **self.params}

    @classmethod
    def from_mapping(cls, mapping: dict) -> "RunConfig":
        flat = flatten(mapping)
        top = {k: flat.pop(k) for k in TOP_LEVEL if k in flat}
        for key in ("problem", "method", "seed"):
            if key not in top:
                raise ConfigError(f"missing required key {key!r}")
        return cls(params=flat, **top)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a mapping of keys to values")
        return cls.from_mapping(data)

    def to_mapping(self) -> dict[str, Any]:
        top = {k: getattr(self, k) for k in TOP_LEVEL}
        return {**top, **self.params}

    def with_overrides(self, **overrides) -> "RunConfig":
        """Copy with top-level fields or dotted parameters replaced (None values ignored)."""
        mapping = self.to_mapping()
        mapping.update({k: v for k, v in overrides.items() if v is not None})
        return RunConfig.from_mapping(mapping)

    # -- resolved problem pieces ---------------------------------------------

    def grid(self) -> BinGrid:
        default = get_benchmark(self.problem).grid
        p = self.params
        return BinGrid(
            default.a if p["mmc.grid.a"] is None else float(p["mmc.grid.a"]),
            default.b if p["mmc.grid.b"] is None else float(p["mmc.grid.b"]),
            default.m if p["mmc.grid.m"] is None else int(p["mmc.grid.m"]),
        )

    def threshold_value(self) -> float:
        bench = get_benchmark(self.problem)
        return bench.threshold if self.threshold is None else float(self.threshold)

    def reference(self) -> float | None:
        if self.ref_pf is not None:
            return float(self.ref_pf)
        return get_benchmark(self.problem).ref_pf(self.threshold_value())


@dataclass
class RepetitionResult:
    rep: int
    estimate: float
    evals: int
    distribution: DistributionEstimate | None = None
    trace: list[dict] | None = None


@dataclass
class ExperimentReport:
    method: str
    problem: str
    L: int
    estimates: list[float]
    evals: list[int]
    ref_pf: float | None
    seed: int
    threshold: float
    wallclock_s: float = 0.0

    @property
    def mean_evals(self) -> float:
        return float(np.mean(self.evals))

    @property
    def rmse(self) -> float | None:
        if self.ref_pf is None:
            return None
        return relative_rmse(self.estimates, self.ref_pf)

    def to_dict(self) -> dict[str, Any]:
        return {
            "method": self.method,
            "problem": self.problem,
            "L": self.L,
            "mean_evals": self.mean_evals,
            "estimates": list(self.estimates),
            "evals": list(self.evals),
            "rmse": self.rmse,
            "ref_pf": self.ref_pf,
            "threshold": self.threshold,
            "seed": self.seed,
            "wallclock_s": self.wallclock_s,
        }


def relative_rmse(estimates, ref_pf: float) -> float:
    """``(1/L) sum |P_l - P_F|^2 / P_F^2``."""
    if ref_pf <= 0:
        raise ValueError("reference probability must be positive")
    est = np.asarray(estimates, dtype=float)
    return float(np.mean((est - ref_pf) ** 2) / ref_pf**2)


def repetition_seeds(master: int, L: int) -> list[np.random.SeedSequence]:
    """Independent child seeds; repetition ``l`` always receives the same stream."""
    return np.random.SeedSequence(master).spawn(L)


def run_once(config: RunConfig, seed, rep: int = 0, keep_distribution: bool = False
             ) -> RepetitionResult:
    """One repetition of the configured method with its own RNG and counter."""
    rng = np.random.default_rng(seed)
    counter = EvalCounter()
    p = config.params
    problem = get_benchmark(config.problem).problem(config.threshold_value())
    proposal = ProposalSpec(float(p["kernel.proposal_width"]))
    dist = None
    trace = None

    if config.method == "mc":
        n = int(p["mc.n_samples"])
        if keep_distribution:
            dist, estimate = mc_tally(problem, config.grid(), n, rng, counter)
        else:
            estimate = run_mc(problem, n, rng, counter)
    elif config.method == "ss":
        ss_cfg = SSConfig(gamma=float(p["ss.gamma"]), n_per_level=int(p["ss.n_per_level"]),
                          max_levels=int(p["ss.max_levels"]),
                          proposal_width=proposal.width)
        estimate = run_ss(problem, ss_cfg, rng, counter).p_f
    else:
        grid = config.grid()
        m_star = align_threshold(grid, problem.threshold)
        if config.method == "mmc":
            dist, estimate, _ = run_mmc(problem, grid, m_star, int(p["mmc.n_per_iter"]),
                                        int(p["mmc.k_iters"]), rng, counter, proposal,
                                        burn_in=int(p["kernel.burn_in"]))
        else:
            cfg = SMMCConfig(alpha=float(p["smmc.alpha"]), n=int(p["smmc.n_per_iter"]),
                             K=int(p["smmc.k_iters"]), max_subsets=int(p["smmc.max_subsets"]),
                             proposal_width=proposal.width)
            res = run_smmc(problem, grid, m_star, cfg, rng, counter)
            dist, estimate = res.estimate, res.p_f
            trace = [s.to_dict() for s in res.trace]
    return RepetitionResult(rep, float(estimate), counter.count,
                            dist if keep_distribution else None, trace)


def _run_rep(args):
    config, seed, rep = args
    return run_once(config, seed, rep)


def run_experiment(config: RunConfig, write: bool = True) -> ExperimentReport:
    """``L`` repetitions, aggregated; optionally persisted under ``config.out_dir``."""
    ref = config.reference()
    if ref is None:
        logger.warning("no reference P_F for %s at threshold %g; RMSE omitted",
                       config.problem, config.threshold_value())
    t0 = time.perf_counter()
    jobs = [(config, s, l) for l, s in enumerate(repetition_seeds(config.seed, config.L))]
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers) as pool:
            results = list(pool.map(_run_rep, jobs))
    else:
        results = [_run_rep(job) for job in jobs]
    report = ExperimentReport(
        method=config.method, problem=config.problem, L=config.L,
        estimates=[r.estimate for r in results], evals=[r.evals for r in results],
        ref_pf=ref, seed=config.seed, threshold=config.threshold_value(),
        wallclock_s=time.perf_counter() - t0,
    )
    if write:
        write_report(report, results, config.out_dir)
    return report


def write_report(report: ExperimentReport, results: list[RepetitionResult], out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "report.json", "w") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(out / "runs.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("rep", "estimate", "evals"))
        for r in results:
            w.writerow((r.rep, repr(r.estimate), r.evals))
    for r in results:
        if r.trace is not None:
            with open(out / f"trace_{r.rep:03d}.json", "w") as fh:
                json.dump(r.trace, fh, indent=1)
    return out / "report.json"


def read_runs(path) -> tuple[list[float], list[int]]:
    """Estimates and evaluation counts from a ``runs.csv`` file."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [float(r["estimate"]) for r in rows], [int(r["evals"]) for r in rows]


def scaled_config(config: RunConfig, budget: float, pilot_evals: float) -> RunConfig:
    """Rescale the method's sample-size parameter so a run costs about ``budget``."""
    key = SIZE_KEY[config.method]
    n = max(1, round(config.params[key] * budget / pilot_evals))
    return config.with_overrides(**{key: n})


def sweep(config: RunConfig, budgets, write: bool = True) -> list[dict[str, Any]]:
    """Run the experiment at several evaluation budgets.

    A single pilot repetition (on a seed outside the experiment streams)
    measures the cost of the configured sample size; each budget then scales
    the size parameter proportionally.
    """
    pilot_seed = np.random.SeedSequence(config.seed).spawn(config.L + 1)[-1]
    pilot = run_once(config, pilot_seed)
    rows = []
    for budget in budgets:
        cfg = scaled_config(config, float(budget), pilot.evals)
        cfg = cfg.with_overrides(out_dir=str(Path(config.out_dir) / f"budget_{float(budget):.0e}"))
        rep = run_experiment(cfg, write=write)
        rows.append({"budget": float(budget), SIZE_KEY[config.method]: cfg.params[SIZE_KEY[config.method]],
                     "mean_evals": rep.mean_evals, "rmse": rep.rmse,
                     "geo_mean": _geo_mean(rep.estimates)})
    if write:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "sweep.json", "w") as fh:
            json.dump({"method": config.method, "problem": config.problem, "rows": rows},
                      fh, indent=2, sort_keys=True)
    return rows


def _geo_mean(values) -> float | None:
    v = np.asarray(values, dtype=float)
    if np.any(v <= 0):
        return None
    return float(np.exp(np.mean(np.log(v))))


def export_ccdf(est: DistributionEstimate, path) -> Path:
    """Write the estimate in the bin CSV format (centers, lefts, probs, pdf, ccdf)."""
    return write_csv(est, path)


def extreme_quantile(est: DistributionEstimate, p: float) -> float:
    """Smallest bin left edge ``y`` with ``P(Y >= y) <= 1 - p``.

    Raises :class:`ResolutionError` when ``1 - p`` is below the smallest
    positive CCDF value the estimate resolves.
    """
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    level = 1.0 - p
    ccdf = est.ccdf()
    positive = ccdf[ccdf > 0]
    if positive.size == 0 or level < positive.min():
        smallest = positive.min() if positive.size else 0.0
        raise ResolutionError(
            f"tail level {level:.3g} is below the smallest resolved CCDF value {smallest:.3g}")
    i = int(np.argmax(ccdf <= level * (1.0 + 1e-12)))
    return float(est.grid.lefts[i])


def distribution_run(config: RunConfig, rep: int = 0) -> RepetitionResult:
    """One repetition (stream ``rep`` of the master seed) keeping the per-bin estimate."""
    if config.method == "ss":
        raise ConfigError("subset simulation does not produce a binned distribution")
    seed = repetition_seeds(config.seed, rep + 1)[rep]
    return run_once(config, seed, rep, keep_distribution=True)


def parse_budgets(text: str) -> list[float]:
    try:
        budgets = [float(b) for b in text.split(",") if b.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse budgets {text!r}") from None
    if not budgets or any(b <= 0 or not math.isfinite(b) for b in budgets):
        raise ConfigError("budgets must be positive numbers")
    return budgets
