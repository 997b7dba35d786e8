"""circpack: pack a best-value subset of rectangles into a circular container."""

__version__ = "0.1.0"

from .model import (
    Incumbent,
    Instance,
    InstanceError,
    PackingSolution,
    Placement,
    Rectangle,
    normalize_instance,
    solution_value,
)
from .geometry import (
    FeasibilityReport,
    StructuralError,
    coordinate_bound,
    corners_inside,
    separated,
    verify_solution,
)
from .formulation import ProblemFunctions, build_problem, expand_rotations
from .nlp import LocalResult, NlpConfig, WorkClock, multistart, solve_feasibility, solve_local
from .fss import FssConfig, SolverReport, round_alphas, run
from .oracle import OracleResult, oracle_best

__all__ = [
    "__version__",
    "Incumbent",
    "Instance",
    "InstanceError",
    "PackingSolution",
    "Placement",
    "Rectangle",
    "normalize_instance",
    "solution_value",
    "FeasibilityReport",
    "StructuralError",
    "coordinate_bound",
    "corners_inside",
    "separated",
    "verify_solution",
    "ProblemFunctions",
    "build_problem",
    "expand_rotations",
    "LocalResult",
    "NlpConfig",
    "WorkClock",
    "multistart",
    "solve_feasibility",
    "solve_local",
    "FssConfig",
    "SolverReport",
    "round_alphas",
    "run",
    "OracleResult",
    "oracle_best",
]
