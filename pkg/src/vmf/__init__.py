"""Mean-field vortex equations with variable intensities: solvers and blow-up diagnostics."""

__version__ = "0.1.0"

from .grid import FlatTorus, Rectangle, UnitDisk, build_grid, integrate, poisson_solve
from .measure import IntensityMeasure, liouville_measure, make_atomic, make_quadrature, sinh_measure
from .solver import ProblemSpec, SeedPolicy, continuation, solve_newton

__all__ = [
    "FlatTorus",
    "IntensityMeasure",
    "ProblemSpec",
    "Rectangle",
    "SeedPolicy",
    "UnitDisk",
    "build_grid",
    "continuation",
    "integrate",
    "liouville_measure",
    "make_atomic",
    "make_quadrature",
    "poisson_solve",
    "sinh_measure",
    "solve_newton",
]
