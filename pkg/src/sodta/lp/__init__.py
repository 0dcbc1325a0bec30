from .model import (
    EQ,
    GE,
    LE,
    ComplexityReport,
    LinearModel,
    ModelError,
    Residuals,
    check_solution,
    count_complexity,
)
from .mps import export_model, parse_mps
from .solve import Solution, SolveOptions, SolverError, Status, solve

__all__ = [
    "EQ", "GE", "LE", "ComplexityReport", "LinearModel", "ModelError", "Residuals",
    "Solution", "SolveOptions", "SolverError", "Status", "check_solution",
    "count_complexity", "export_model", "parse_mps", "solve",
]
