"""Subset multicanonical Monte Carlo for rare-event probabilities and tail distributions."""

from .binning import (AlignmentError, BinGrid, DistributionEstimate, ResolutionError,
                      align_threshold, histogram, quantile, read_csv, write_csv)
from .harness import (ConfigError, ExperimentReport, RunConfig, export_ccdf, extreme_quantile,
                      run_experiment, sweep)
from .kernel import ChainState, ProposalSpec, TargetSpec, mm_step, multi_chain_sample
from .mmc import ThetaTable, run_mmc, update_theta
from .montecarlo import mc_distribution, run_mc
from .problem import EvalCounter, ProblemDefinition, standard_normal_problem
from .smmc import ConvergenceError, SMMCConfig, SMMCResult, run_smmc
from .subset_sim import SSConfig, SSResult, run_ss

__version__ = "0.1.0"

__all__ = [
    "AlignmentError", "BinGrid", "ChainState", "ConfigError", "ConvergenceError",
    "DistributionEstimate", "EvalCounter", "ExperimentReport", "ProblemDefinition",
    "ProposalSpec", "ResolutionError", "RunConfig", "SMMCConfig", "SMMCResult", "SSConfig",
    "SSResult", "TargetSpec", "ThetaTable", "align_threshold", "export_ccdf",
    "extreme_quantile", "histogram", "mc_distribution", "mm_step", "multi_chain_sample",
    "quantile", "read_csv", "run_experiment", "run_mc", "run_mmc", "run_smmc", "run_ss",
    "standard_normal_problem", "sweep", "update_theta", "write_csv",
]
