"""Multi-term space-time fractional transport: solver, Mittag-Leffler oracles
and numerical checks of the discrete extremum principles."""

from .core import (
    AdmissibilityError,
    CoefficientField,
    DataFunction,
    FractionalOrder,
    ProblemSpec,
    SolutionField,
    StructuralError,
    UniformGrid,
    VerificationReport,
    Violation,
    boundary_extrema,
    require_admissible,
    validate_problem,
)
from .exprlang import CompiledExpr, ExprError, compile_expr, parse_expr, to_source
from .fracops import build_weights, caputo_l1_all, caputo_l1_at, caputo_quad_oracle
from .mlf import MittagLefflerRangeError, mittag_leffler, ml_space_solution, ml_time_solution
from .solver import (
    CauchySpec,
    SemilinearTerm,
    solve_cauchy_truncated,
    solve_ibvp,
    solve_multiterm_fode,
    solve_semilinear,
)
from .verify import (
    HypothesisError,
    check_cauchy_sup,
    check_comparison,
    check_max_principle,
    check_semilinear_comparison,
    check_uniqueness,
    convergence_report,
    convergence_study,
    fuzz_max_principle,
)

__version__ = "0.1.0"

__all__ = [
    "AdmissibilityError",
    "CauchySpec",
    "CoefficientField",
    "CompiledExpr",
    "DataFunction",
    "ExprError",
    "FractionalOrder",
    "HypothesisError",
    "MittagLefflerRangeError",
    "ProblemSpec",
    "SemilinearTerm",
    "SolutionField",
    "StructuralError",
    "UniformGrid",
    "VerificationReport",
    "Violation",
    "boundary_extrema",
    "build_weights",
    "caputo_l1_all",
    "caputo_l1_at",
    "caputo_quad_oracle",
    "check_cauchy_sup",
    "check_comparison",
    "check_max_principle",
    "check_semilinear_comparison",
    "check_uniqueness",
    "compile_expr",
    "convergence_report",
    "convergence_study",
    "fuzz_max_principle",
    "mittag_leffler",
    "ml_space_solution",
    "ml_time_solution",
    "parse_expr",
    "require_admissible",
    "solve_cauchy_truncated",
    "solve_ibvp",
    "solve_multiterm_fode",
    "solve_semilinear",
    "to_source",
    "validate_problem",
]
