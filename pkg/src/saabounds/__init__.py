"""Non-asymptotic confidence bounds for SAA optimal values, plus the studies behind them."""

from .bounds import (BoundParams, ConfidenceInterval, MomentConstants,
                     bound_a, bound_b, ci_asymptotic, ci_saa_experimental,
                     ci_saa_theoretical, gamma_lower_bound, lower_width,
                     normal_cdf, normal_quantile, optimize_ci_params,
                     ratio_table1, risk_beta, risks_minimax, tau_star,
                     theta_lower_bound, underestimator_feasible)
from .geometry import (GeometrySpec, NormKind, euclidean_spec, mixed_spec,
                       omega_l1, omega_mixed, prox_entropy, prox_power,
                       simplex_l1_spec)
from .problems import (InstanceKind, ProblemInstance, Sample,
                       build_constrained_instance, build_cvar_instance,
                       build_gaussian_var_instance, build_hard_case,
                       build_minimax_instance, build_quadratic_instance,
                       constants_cvar, constants_gaussian_var,
                       constants_quadratic, exact_f, gaussian_sup_constant,
                       philox_rng, sample, true_opt)
from .smd import SmdRun, run_smd
from .solvers import (LinearProgram, SolveResult, saa_lp_reformulate,
                      solve_lp, solve_simplex_smooth)

__version__ = "0.1.0"
