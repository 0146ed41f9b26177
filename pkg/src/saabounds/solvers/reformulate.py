"""Exact LP reformulations of the piecewise-linear sample average problems.

Each builder takes a scenario matrix (one row per realization) and a weight
vector (uniform 1/N for a sample, exact probabilities for a full enumeration)
and produces a ``LinearProgram`` whose optimal value equals the weighted
average problem exactly: absolute values and positive parts get one auxiliary
variable per scenario, the minimax gets an epigraph variable.
"""

from __future__ import annotations

import numpy as np

from .lp import LinearProgram

__all__ = [
    "var_portfolio_lp",
    "cvar_portfolio_lp",
    "minimax_cvar_lp",
    "constrained_cvar_lp",
    "saa_lp_reformulate",
]


def _weights(xi: np.ndarray, weights) -> np.ndarray:
    s = xi.shape[0]
    if weights is None:
        return np.full(s, 1.0 / s)
    w = np.asarray(weights, dtype=float)
    if w.shape != (s,):
        raise ValueError("weights must have one entry per scenario")
    return w


def var_portfolio_lp(xi: np.ndarray, kappa0: float, kappa1: float,
                     weights=None) -> LinearProgram:
    """min_x  kappa0 * E_w[xi'x] + kappa1 * E_w|xi'x|  over the simplex.

    Absolute values use the positive/negative split xi'x = p - q with equality
    rows: the split columns are singletons, so the solver's crash basis starts
    feasible and (generically) non-degenerate.
    """
    xi = np.asarray(xi, dtype=float)
    s, n = xi.shape
    w = _weights(xi, weights)
    c = np.concatenate([kappa0 * (w @ xi), kappa1 * w, kappa1 * w])
    a_eq = np.vstack([
        np.hstack([xi, -np.eye(s), np.eye(s)]),
        np.concatenate([np.ones(n), np.zeros(2 * s)])[None, :],
    ])
    b_eq = np.concatenate([np.zeros(s), [1.0]])
    lo = np.zeros(n + 2 * s)
    hi = np.concatenate([np.ones(n), np.full(2 * s, np.inf)])
    start = np.zeros(n + 2 * s)
    start[0] = 1.0
    return LinearProgram(c, a_eq=a_eq, b_eq=b_eq, lo=lo, hi=hi, start=start)


def cvar_portfolio_lp(xi: np.ndarray, kappa0: float, kappa1: float, eps: float,
                      weights=None, degenerate: bool = False) -> LinearProgram:
    """Weighted mean-CVaR portfolio selection as an LP.

    Decision is [allocation x' ; threshold x0] with |x0| <= 1; ``degenerate``
    is the single-asset convention where x' is the constant 1 and only x0
    remains.
    """
    xi = np.asarray(xi, dtype=float)
    w = _weights(xi, weights)
    if degenerate:
        z = xi[:, 0] if xi.ndim == 2 else xi
        s = z.size
        c = np.concatenate([[kappa1], (kappa1 / eps) * w])
        a_ub = np.hstack([-np.ones((s, 1)), -np.eye(s)])
        b_ub = -z
        lo = np.concatenate([[-1.0], np.zeros(s)])
        hi = np.concatenate([[1.0], np.full(s, np.inf)])
        start = np.concatenate([[1.0], np.zeros(s)])
        return LinearProgram(c, a_ub=a_ub, b_ub=b_ub, lo=lo, hi=hi,
                             offset=float(kappa0 * w.dot(z)), start=start)
    s, n = xi.shape
    c = np.concatenate([kappa0 * (w @ xi), [kappa1], (kappa1 / eps) * w])
    a_ub = np.hstack([xi, -np.ones((s, 1)), -np.eye(s)])
    b_ub = np.zeros(s)
    a_eq = np.concatenate([np.ones(n), [0.0], np.zeros(s)])[None, :]
    lo = np.concatenate([np.zeros(n), [-1.0], np.zeros(s)])
    hi = np.concatenate([np.full(n, np.inf), [1.0], np.full(s, np.inf)])
    start = np.concatenate([np.zeros(n), [1.0], np.zeros(s)])  # threshold high: rows feasible
    return LinearProgram(c, a_eq=a_eq, b_eq=[1.0], a_ub=a_ub, b_ub=b_ub, lo=lo, hi=hi,
                         start=start)


def minimax_cvar_lp(xi: np.ndarray, eps: float, chi, weights=None,
                    components=(0, 1, 2), v_bound: float = 1.0) -> LinearProgram:
    """Epigraph LP for min_x max of the three offset risk components.

    Components: 0 = CVaR threshold form plus chi[0], 1 = mean return plus
    chi[1], 2 = chi[2] minus mean return.  Variables are
    [allocation u(n); threshold v; epigraph w; excesses a(s)].
    """
    xi = np.asarray(xi, dtype=float)
    s, n = xi.shape
    w_sc = _weights(xi, weights)
    mbar = w_sc @ xi
    nv = n + 2 + s
    c = np.zeros(nv)
    c[n + 1] = 1.0  # epigraph variable
    rows, rhs = [], []
    # a_t >= xi_t'u - v
    blk = np.hstack([xi, -np.ones((s, 1)), np.zeros((s, 1)), -np.eye(s)])
    rows.append(blk)
    rhs.extend([0.0] * s)
    if 0 in components:
        r = np.zeros(nv)
        r[n] = 1.0
        r[n + 1] = -1.0
        r[n + 2:] = w_sc / eps
        rows.append(r[None, :])
        rhs.append(-chi[0])
    if 1 in components:
        r = np.zeros(nv)
        r[:n] = mbar
        r[n + 1] = -1.0
        rows.append(r[None, :])
        rhs.append(-chi[1])
    if 2 in components:
        r = np.zeros(nv)
        r[:n] = -mbar
        r[n + 1] = -1.0
        rows.append(r[None, :])
        rhs.append(-chi[2])
    a_ub = np.vstack(rows)
    a_eq = np.concatenate([np.ones(n), np.zeros(2 + s)])[None, :]
    lo = np.concatenate([np.zeros(n), [-v_bound, -np.inf], np.zeros(s)])
    hi = np.concatenate([np.full(n, np.inf), [v_bound, np.inf], np.full(s, np.inf)])
    start = np.concatenate([np.zeros(n), [v_bound, 0.0], np.zeros(s)])
    return LinearProgram(c, a_eq=a_eq, b_eq=[1.0], a_ub=a_ub, b_ub=np.array(rhs),
                         lo=lo, hi=hi, start=start)


def constrained_cvar_lp(xi: np.ndarray, eps: float, chi: float, weights=None,
                        shift: float = 0.0, v_bound: float = 10.0) -> LinearProgram:
    """CVaR objective under a mean-return floor, optionally with the
    underestimation shift subtracted from objective and constraint alike."""
    xi = np.asarray(xi, dtype=float)
    s, n = xi.shape
    w_sc = _weights(xi, weights)
    mbar = w_sc @ xi
    nv = n + 1 + s
    c = np.zeros(nv)
    c[n] = 1.0
    c[n + 1:] = w_sc / eps
    blk = np.hstack([xi, -np.ones((s, 1)), -np.eye(s)])
    feas = np.concatenate([-mbar, [0.0], np.zeros(s)])[None, :]
    a_ub = np.vstack([blk, feas])
    b_ub = np.concatenate([np.zeros(s), [shift - chi]])
    a_eq = np.concatenate([np.ones(n), np.zeros(1 + s)])[None, :]
    lo = np.concatenate([np.zeros(n), [-v_bound], np.zeros(s)])
    hi = np.concatenate([np.full(n, np.inf), [v_bound], np.full(s, np.inf)])
    start = np.concatenate([np.zeros(n), [v_bound], np.zeros(s)])
    return LinearProgram(c, a_eq=a_eq, b_eq=[1.0], a_ub=a_ub, b_ub=b_ub,
                         lo=lo, hi=hi, offset=-shift, start=start)


def saa_lp_reformulate(instance, xi: np.ndarray, weights=None,
                       shift: float = 0.0, chi=None) -> LinearProgram:
    """Dispatch an instance + scenario set to its exact LP reformulation.

    ``weights`` turns the sample average into any weighted average (exact
    distributions included); ``shift`` applies the underestimation offset to
    the constrained kind; ``chi`` overrides the constraint level (relaxations).
    """
    kind = instance.kind.value
    if kind == "gaussian_var":
        k0 = 0.0 if instance.drop_zero_mean else instance.kappa0
        return var_portfolio_lp(xi, k0, instance.kappa1, weights)
    if kind == "cvar":
        return cvar_portfolio_lp(xi, instance.kappa0, instance.kappa1,
                                 instance.eps_cvar, weights,
                                 degenerate=instance.geometry.degenerate_simplex)
    if kind == "minimax_cvar":
        return minimax_cvar_lp(xi, instance.eps_cvar,
                               chi if chi is not None else instance.chi, weights)
    if kind == "constrained_cvar":
        return constrained_cvar_lp(xi, instance.eps_cvar,
                                   instance.chi if chi is None else chi,
                                   weights, shift=shift)
    raise TypeError(f"no LP reformulation for instance kind {kind!r}")
