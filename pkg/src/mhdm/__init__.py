"""Multiscale hierarchical decompositions for linear inverse problems.

The MHDM builds a solution of ``T x = f`` as a sum of components
``u_0 + u_1 + ...``, each a regularized fit to the residual left by the
previous ones with an increasing parameter ``lambda_n``.

Submodules
----------
linops       dense operators (identity, Gaussian blur, differences)
penalties    penalty functionals and per-iteration schedules
scalar_math  Lambert W and scalar proximal maps
solvers      Tikhonov subproblem solvers
engine       MHDM variants, lambda schedules and stopping rules
analysis     decomposition identities, agreement and cone checks
io           CSV/npz serialization
experiments  configuration-driven experiments and the ``mhdm`` CLI
"""

from . import analysis, engine, io, linops, penalties, scalar_math, solvers
from ._backend import NAME as BACKEND
from .engine import (
    Discrepancy,
    Explicit,
    FixedCount,
    Geometric,
    MultiscaleDecomposition,
    discrepancy_stop_index,
    run_bregman,
    run_flexible,
    run_iterated_tikhonov,
    run_mhdm,
    run_tight,
)
from .errors import ConfigError, NumericalFailure, SolverFailure, UnsupportedCombination
from .linops import LinearMap, diff_matrix, identity, make_gaussian_conv, substitution_operator
from .penalties import TV1D, L1, Entropy, Lp, Quadratic
from .solvers import SolveOptions, solve_subproblem

__version__ = "0.1.0"

__all__ = [
    "analysis", "engine", "io", "linops", "penalties", "scalar_math", "solvers",
    "BACKEND",
    "Discrepancy", "Explicit", "FixedCount", "Geometric", "MultiscaleDecomposition",
    "discrepancy_stop_index", "run_bregman", "run_flexible", "run_iterated_tikhonov",
    "run_mhdm", "run_tight",
    "ConfigError", "NumericalFailure", "SolverFailure", "UnsupportedCombination",
    "LinearMap", "diff_matrix", "identity", "make_gaussian_conv", "substitution_operator",
    "TV1D", "L1", "Entropy", "Lp", "Quadratic",
    "SolveOptions", "solve_subproblem",
]
