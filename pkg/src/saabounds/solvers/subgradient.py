"""Nonsmooth fallback for piecewise-linear SAAs too large for the dense LP.

Entropy mirror descent over the simplex block with an averaged-model lower
bound: averaging the supporting hyperplanes collected along the trajectory
gives a global underestimator of the objective, and its exact minimum over the
domain certifies the returned iterate.  The certificate is of the same
max-linearization family as the Frank-Wolfe gap and is reported as such; the
achieved gap is returned, whether or not it met the request.
"""

from __future__ import annotations

import math

import numpy as np

from ..geometry import prox_entropy
from .lp import CertificateKind, SolveResult

__all__ = ["solve_simplex_nonsmooth"]


def solve_simplex_nonsmooth(subgrad_oracle, n: int, lipschitz: float,
                            tol: float, max_iters: int = 200_000) -> SolveResult:
    """Minimize a convex piecewise-linear function over the simplex.

    ``subgrad_oracle(x)`` returns ``(value, subgradient)``.  Runs entropy
    mirror descent with the lipschitz-scaled step, keeps the running average
    of the collected linearizations, and certifies via

        gap = f(x_best) - min_u [ mean_t f(x_t) + mean_t <g_t, u - x_t> ].
    """
    x = np.full(n, 1.0 / n)
    best_x, best_f = x.copy(), math.inf
    lin_const = 0.0          # running mean of f(x_t) - <g_t, x_t>
    lin_slope = np.zeros(n)  # running mean of g_t
    gap = math.inf
    for t in range(1, max_iters + 1):
        f, g = subgrad_oracle(x)
        if f < best_f:
            best_f, best_x = f, x.copy()
        lin_const += (f - float(g.dot(x)) - lin_const) / t
        lin_slope += (g - lin_slope) / t
        lower = lin_const + float(np.min(lin_slope))  # exact min over vertices
        gap = best_f - lower
        if gap <= tol:
            return SolveResult(x=best_x, value=best_f, gap=max(gap, 0.0),
                               certificate=CertificateKind.FW_GAP, iterations=t)
        step = math.sqrt(2.0 * math.log(n)) / (lipschitz * math.sqrt(t))
        x = prox_entropy(x, -g, step)
    return SolveResult(x=best_x, value=best_f, gap=max(gap, 0.0),
                       certificate=CertificateKind.FW_GAP, iterations=max_iters)
