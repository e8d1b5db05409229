"""Linear boundary-value problems for ODE systems in Sobolev spaces, with
numerical checks of parameter continuity and multipoint conditions."""

from .errors import (BVPError, ConfigError, DomainError, NoUniqueSolutionError, OrderError,
                     SingularFundamentalMatrixError, StackConsistencyError, StructuralError,
                     UnsupportedFormError)
from .funcspace import (Grid, GridFunction, SobolevParams, eval_at, holder_seminorm, lp_norm,
                        make_grid_function, sobolev_norm)
from .multipoint import MultipointBoundaryForm, build_multipoint, check_d_conditions, matrix_entry_norm
from .system import (CanonicalBoundaryForm, DifferentialSystem, ProblemInstance,
                     apply_boundary_operator, apply_differential_operator, companion_reduce,
                     lift_boundary_form)
from .solver import (characteristic_matrix, condition0_check, discrepancy, fundamental_matrix,
                     solve_bvp)

__version__ = "0.1.0"
