"""Exact arithmetic: rationals, an exact simplex solver and integer lattices."""
from fractions import Fraction as Rational

from .lattice import (
    IntegerSolver,
    echelon_pivots,
    integer_inverse,
    integer_kernel_basis,
    integer_rank,
    lll_reduce,
    row_basis,
    solve_square,
)
from .simplex import (
    INFEASIBLE,
    OPTIMAL,
    UNBOUNDED,
    LinearProgram,
    OptimumReport,
    Tableau,
    coordinate_range,
    integer_rows,
    simplex_solve,
)

__all__ = [
    "Rational",
    "LinearProgram",
    "OptimumReport",
    "Tableau",
    "simplex_solve",
    "coordinate_range",
    "integer_rows",
    "integer_kernel_basis",
    "IntegerSolver",
    "integer_inverse",
    "integer_rank",
    "lll_reduce",
    "row_basis",
    "echelon_pivots",
    "solve_square",
    "OPTIMAL",
    "INFEASIBLE",
    "UNBOUNDED",
]
