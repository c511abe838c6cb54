"""Cardinality optimization toolkit.

Exact and heuristic solvers for the three canonical sparse-optimization
problem shapes (cardinality minimization under a residual budget,
residual minimization under a cardinality budget, and the additive
trade-off), plus l1 surrogates, recovery diagnostics, matrix
sparsification, and a sparse portfolio model.
"""

from .core import (
    Matrix,
    ProblemInstance,
    Solution,
    norm,
    project_l1_ball,
    support_of,
)

__all__ = [
    "Matrix",
    "ProblemInstance",
    "Solution",
    "norm",
    "project_l1_ball",
    "support_of",
]

__version__ = "0.1.0"
