"""Optimal exit level for a mean-reverting spread with jumps and a stop-loss."""

from ._core import (
    BracketError,
    IntegrationError,
    ModelParams,
    NumericalError,
    SingularSystemError,
    Solution,
    __version__,
    check_conditions,
    constants,
    f_n,
    find_boundary,
    ode_free_boundary,
    ode_solution,
    simulate,
    solve,
    system_matrix,
)

__all__ = [
    "BracketError",
    "IntegrationError",
    "ModelParams",
    "NumericalError",
    "SingularSystemError",
    "Solution",
    "__version__",
    "check_conditions",
    "constants",
    "f_n",
    "find_boundary",
    "ode_free_boundary",
    "ode_solution",
    "simulate",
    "solve",
    "system_matrix",
]
