"""hp-version C1-continuous Petrov-Galerkin time stepping for ``u'' = f(t, u, u')``."""

from .cpg import LocalSolution, CpgSolution, ProblemDef, SolverOptions, eval_solution, solve, solve_step
from .errors import (
    CapabilityError,
    CpgError,
    DomainError,
    InvalidDegreeError,
    LookupFailure,
    MeshValidationError,
    StepFailure,
)
from .mesh import TimeMesh, build_from_arrays, build_uniform, contraction_check

__version__ = "0.1.0"

__all__ = [
    "ProblemDef",
    "SolverOptions",
    "LocalSolution",
    "CpgSolution",
    "solve",
    "solve_step",
    "eval_solution",
    "TimeMesh",
    "build_uniform",
    "build_from_arrays",
    "contraction_check",
    "CpgError",
    "InvalidDegreeError",
    "DomainError",
    "MeshValidationError",
    "CapabilityError",
    "LookupFailure",
    "StepFailure",
]
