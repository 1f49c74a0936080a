"""Granger causality graphs of multivariate Hawkes processes.

Learns basis-expanded impact functions with an EM algorithm regularised by
sparse-group-lasso and pairwise-similarity penalties, and reads the Granger
graph off the all-zero coefficient groups.
"""

from ._backend import BACKEND
from .basis import BasisConfig, select_basis, silverman_bandwidth, spectral_tail
from .core import (ExcitationStats, branching_matrix, excitation_stats, extract_graph,
                   impact_function, intensity, log_likelihood)
from .evaluation import (EvalReport, evaluate, loglike_test, relative_error_mu,
                         relative_error_phi, score_graph)
from .experiment import ExperimentPlan, SweepPlan, run_experiment, sweep_hyperparameters
from .learn import METHODS, FitReport, LearnConfig, fit, prox_group
from .model import ClusterStructure, Dataset, EventSequence, GrangerGraph, ModelParams
from .simulate import GroundTruth, make_synthetic, sample, sample_many

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "BasisConfig", "ClusterStructure", "Dataset", "EvalReport", "EventSequence",
    "ExcitationStats", "ExperimentPlan", "FitReport", "GrangerGraph", "GroundTruth",
    "LearnConfig", "METHODS", "ModelParams", "SweepPlan", "branching_matrix", "evaluate",
    "excitation_stats", "extract_graph", "fit", "impact_function", "intensity",
    "log_likelihood", "loglike_test", "make_synthetic", "prox_group", "relative_error_mu",
    "relative_error_phi", "run_experiment", "sample", "sample_many", "score_graph",
    "select_basis", "silverman_bandwidth", "spectral_tail", "sweep_hyperparameters",
]
