"""Exact spectra of two-mode boson Hamiltonians via Bethe ansatz equations."""

from .bethe import BetheState, SolverConfig, energy_from_roots, solve_bae
from .diffop import DiffOperator, build_diffop, case_coefficients
from .oracle import oracle_states
from .polynomial import Polynomial
from .repkit import BlockLabel, ModelParams, build_block_matrices

__version__ = "0.1.0"

__all__ = [
    "BetheState", "BlockLabel", "DiffOperator", "ModelParams", "Polynomial", "SolverConfig",
    "build_block_matrices", "build_diffop", "case_coefficients", "energy_from_roots",
    "oracle_states", "solve_bae", "__version__",
]
