"""Sparse, box-constrained optimal control of semilinear elliptic equations
with a piecewise-smooth (nonsmooth) nonlinearity.

The package solves the discretized problem
``min F(u) + kappa ||u||_L1`` subject to ``A y + f(y) = u`` and
``alpha <= u <= beta``, and checks first- and second-order optimality
conditions numerically at the computed control.
"""

from .curvature import (CurvatureBreakdown, Q_explicit, Q_tilde_limit, critical_cone_membership,
                        densify_critical_direction, key_limit_defect, onedim_lemma_study,
                        probe_directions, second_order_report, second_subderivative_check,
                        taylor_remainder, zeta_field)
from .grid import (EllipticOperator, Grid, assemble_operator, build_grid, integrate, norm,
                   read_grid_function, write_grid_function)
from .levelset import GradientFloorError, LevelSet, extract_level_set
from .nonsmooth import (MollifiedFunction, PiecewiseSmoothFunction, clarke, dir_deriv,
                        epsilon0, eval_f, eval_fprime_offbreak, eval_fsecond_offbreak,
                        max_function, mollify, piecewise_linear, piecewise_polynomial, sigma)
from .objective import (ControlProblem, eval_F, eval_j, eval_J, grad_F, j_dir_deriv,
                        lambda_from_p, prox_box_l1, subgradient_membership, tracking_problem)
from .optimizer import (OptimizeReport, default_schedule, solve_continuation, solve_regularized,
                        stationarity_residual)
from .pde import (SolverError, StateSolveReport, solve_adjoint, solve_dir_deriv,
                  solve_linearized, solve_state, solve_state_mollified)
from .stationarity import (StationarityReport, StructureReport, build_stationarity,
                           check_structure, sparsity_sweep)

__version__ = "0.1.0"
