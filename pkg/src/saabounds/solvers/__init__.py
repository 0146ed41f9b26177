"""Certified deterministic solvers: dense LP, simplex Frank-Wolfe, nonsmooth fallback."""

from .frank_wolfe import SmoothOracle, fw_gap, solve_simplex_smooth
from .lp import (CertificateKind, IterationLimitError, LinearProgram, LpError,
                 LpInfeasibleError, LpUnboundedError, SolveResult, lp_to_text,
                 solve_lp)
from .reformulate import (constrained_cvar_lp, cvar_portfolio_lp,
                          minimax_cvar_lp, saa_lp_reformulate, var_portfolio_lp)
from .subgradient import solve_simplex_nonsmooth

__all__ = [
    "CertificateKind", "IterationLimitError", "LinearProgram", "LpError",
    "LpInfeasibleError", "LpUnboundedError", "SolveResult", "lp_to_text",
    "solve_lp", "SmoothOracle", "fw_gap", "solve_simplex_smooth",
    "solve_simplex_nonsmooth", "var_portfolio_lp", "cvar_portfolio_lp",
    "minimax_cvar_lp", "constrained_cvar_lp", "saa_lp_reformulate",
]
