"""Finite-difference lab for the nonlocal logistic equation with nonlinear advection.

    -Delta u + alpha . grad(|u|^{p-1} u) = (lambda - int K(x, y) |u(y)|^gamma dy) u  in Omega,
    u = 0 on the boundary.
"""

from .eigen import EigenPair, principal_eigenpair, principal_eigenvalue_advection
from .experiments import (
    SweepSpec,
    divergence_free_case,
    estimate_alpha_nonexistence_p1,
    sweep_alpha_to_infinity,
    sweep_alpha_to_zero,
    sweep_p_to_one,
    threshold_bisect,
    trace_branch,
)
from .grid import Domain, Field, Grid, build_grid, c1_distance, integrate, sup_norm
from .operators import (
    BallKernel,
    ConstantFlow,
    ConstantKernel,
    FieldFlow,
    GaussianKernel,
    ProblemParams,
    TableKernel,
    assemble_kernel,
    phi,
    residual,
    rotational_flow,
)
from .solver import SolveReport, SolverOptions, detect_nonexistence, solve_positive, verify_solution

__version__ = "0.1.0"
