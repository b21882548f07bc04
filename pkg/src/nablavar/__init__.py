"""Backward (nabla) calculus on finite time scales and extremals of
variational and optimal-control problems whose action depends on the
free endpoints ``x(a)`` and ``x(b)``."""

from ._newton import SolverOptions
from .errors import (
    DomainError,
    ExprError,
    NotAMemberError,
    ParseError,
    RegressivityWarning,
    SingularSystemError,
    SolverError,
    SolverFailure,
    TimeScaleError,
    UnboundParameterError,
)
from .expr import Expression, eval_with_sens, parse, sample_hessian
from .nabla import GridFunction, nabla_derivative, nabla_integral, rho_compose
from .octrl import (
    Certificate,
    ControlExtremal,
    ControlProblem,
    certify_convexity,
    check_regressivity,
    hamiltonian_residuals,
    solve_control,
    transversality_costate,
)
from .timescale import TimeScale, from_descriptor, from_points, make_qscale, make_uniform, union
from .varsolve import (
    ExtremalSolution,
    Fixed,
    Free,
    LagrangeProblem,
    ResidualReport,
    el_residual,
    evaluate_action,
    solve_lagrange,
    transversality_residuals,
)

__version__ = "0.1.0"
