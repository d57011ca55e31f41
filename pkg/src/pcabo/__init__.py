"""Bayesian optimization with a rank-weighted PCA subspace (PCA-BO), plus plain BO."""

from .acquisition import BoundingCube, boundary_distance, bounding_cube, expected_improvement, penalized_ei
from .de import DeConfig, de_maximize
from .doe import BoxDomain, lhs_sample
from .engine import Dataset, OptimizerConfig, RunRecord, run_bo, run_pcabo, run_random
from .gpr import GprModel, Kernel, fit, kernel_eval, log_marginal_likelihood, predict
from .pca import PcaMap, fit_pca, forward_map, inverse_map, rank_weights
from .problems import TestProblem, evaluate, make_problem

__all__ = [
    "BoundingCube",
    "BoxDomain",
    "Dataset",
    "DeConfig",
    "GprModel",
    "Kernel",
    "OptimizerConfig",
    "PcaMap",
    "RunRecord",
    "TestProblem",
    "boundary_distance",
    "bounding_cube",
    "de_maximize",
    "evaluate",
    "expected_improvement",
    "fit",
    "fit_pca",
    "forward_map",
    "inverse_map",
    "kernel_eval",
    "lhs_sample",
    "log_marginal_likelihood",
    "make_problem",
    "penalized_ei",
    "predict",
    "rank_weights",
    "run_bo",
    "run_pcabo",
    "run_random",
]

__version__ = "0.1.0"
