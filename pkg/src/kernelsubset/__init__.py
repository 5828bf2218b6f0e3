"""Exact feature subset selection for Gaussian-kernel SVMs by kernel-target alignment."""

from .alignment import (
    KernelConfig,
    alignment_objective,
    normalized_alignment,
    reduced_objective,
    sigest_gamma,
    subset_kernel,
)
from .baselines import SelectionTrace, greedy_forward, rfe_k
from .dataset import (
    Dataset,
    DatasetError,
    PairStructure,
    SubsetMask,
    build_pair_structure,
    load_csv,
    standardize,
)
from .milo import (
    EMatrix,
    MiloModel,
    big_m,
    build_milo,
    build_rmilo,
    export_model,
    reconstruct_e,
    verify_solution,
)
from .solver import (
    BnbNode,
    Limits,
    SolveResult,
    brute_force,
    greedy_incumbent,
    node_upper_bound,
    opt_gap,
    solve_bnb,
)
from .svm import SvmModel, compute_bias, dual_objective, predict, train
from .synthgen import GenConfig, generate

__all__ = [
    "alignment_objective",
    "big_m",
    "BnbNode",
    "brute_force",
    "build_milo",
    "build_pair_structure",
    "build_rmilo",
    "compute_bias",
    "Dataset",
    "DatasetError",
    "dual_objective",
    "EMatrix",
    "export_model",
    "GenConfig",
    "generate",
    "greedy_forward",
    "greedy_incumbent",
    "KernelConfig",
    "Limits",
    "load_csv",
    "MiloModel",
    "node_upper_bound",
    "normalized_alignment",
    "opt_gap",
    "PairStructure",
    "predict",
    "reconstruct_e",
    "reduced_objective",
    "rfe_k",
    "SelectionTrace",
    "sigest_gamma",
    "solve_bnb",
    "SolveResult",
    "standardize",
    "subset_kernel",
    "SubsetMask",
    "SvmModel",
    "train",
    "verify_solution",
]

__version__ = "0.1.0"
