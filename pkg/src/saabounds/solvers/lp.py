"""Dense bounded-variable revised simplex with primal-dual certificates.

Every successful solve returns a primal point together with row duals and
reduced costs; the duality gap is computed explicitly and checked against the
requested tolerance, so callers never have to trust the pivoting logic.
Infeasibility and unboundedness are reported with their own certificates
(a Farkas row combination, an improving ray).

Scale target is desk-sized problems (up to a few thousand rows); the basis
inverse is kept explicitly and refreshed every ``REFRESH_EVERY`` pivots, with
product-form updates in between.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

__all__ = [
    "LinearProgram",
    "SolveResult",
    "CertificateKind",
    "LpError",
    "LpInfeasibleError",
    "LpUnboundedError",
    "IterationLimitError",
    "solve_lp",
    "lp_to_text",
]

REFRESH_EVERY = 50
_PIVOT_TOL = 1e-10
_FEAS_TOL = 1e-9


class LpError(RuntimeError):
    pass


class LpInfeasibleError(LpError):
    """Problem infeasible; ``farkas_y`` certifies it (see ``solve_lp`` docs)."""

    def __init__(self, message, farkas_y=None, infeasibility=0.0):
        super().__init__(message)
        self.farkas_y = farkas_y
        self.infeasibility = infeasibility


class LpUnboundedError(LpError):
    """Objective unbounded below; ``ray`` is a feasible improving direction."""

    def __init__(self, message, ray=None):
        super().__init__(message)
        self.ray = ray


class IterationLimitError(LpError):
    """Pivot/iteration budget exhausted; ``best`` holds the last iterate info."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class CertificateKind(Enum):
    DUAL_PAIR = "dual_pair"
    FW_GAP = "fw_gap"


@dataclass(frozen=True)
class SolveResult:
    x: np.ndarray
    value: float
    gap: float
    certificate: CertificateKind
    iterations: int
    dual: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None


@dataclass
class LinearProgram:
    """min c'x  s.t.  A_eq x = b_eq,  A_ub x <= b_ub,  lo <= x <= hi."""

    c: np.ndarray
    a_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    a_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None
    offset: float = 0.0
    names: list[str] = field(default_factory=list)
    start: np.ndarray | None = None   # nonbasic-bound selection hint

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        n = self.c.size
        if self.a_eq is None:
            self.a_eq = np.zeros((0, n))
            self.b_eq = np.zeros(0)
        else:
            self.a_eq = np.atleast_2d(np.asarray(self.a_eq, dtype=float))
            self.b_eq = np.atleast_1d(np.asarray(self.b_eq, dtype=float))
        if self.a_ub is None:
            self.a_ub = np.zeros((0, n))
            self.b_ub = np.zeros(0)
        else:
            self.a_ub = np.atleast_2d(np.asarray(self.a_ub, dtype=float))
            self.b_ub = np.atleast_1d(np.asarray(self.b_ub, dtype=float))
        self.lo = np.full(n, -np.inf) if self.lo is None else np.asarray(self.lo, dtype=float)
        self.hi = np.full(n, np.inf) if self.hi is None else np.asarray(self.hi, dtype=float)
        if self.a_eq.shape != (self.b_eq.size, n) or self.a_ub.shape != (self.b_ub.size, n):
            raise ValueError("constraint matrix shapes are inconsistent with c")
        if self.lo.size != n or self.hi.size != n:
            raise ValueError("bound vectors must have one entry per variable")
        for arr, what in ((self.c, "objective"), (self.a_eq, "equality matrix"),
                          (self.b_eq, "equality rhs"), (self.a_ub, "inequality matrix"),
                          (self.b_ub, "inequality rhs")):
            if arr.size and not np.all(np.isfinite(arr)):
                raise ValueError(f"non-finite entries in {what}")
        if np.any(self.lo > self.hi):
            raise ValueError("some lower bound exceeds its upper bound")
        if self.start is not None:
            self.start = np.asarray(self.start, dtype=float)
            if self.start.size != n:
                raise ValueError("start hint must have one entry per variable")

    @property
    def n_vars(self) -> int:
        return self.c.size


# status codes for columns
_BASIC, _AT_LO, _AT_HI, _FREE = 0, 1, 2, 3


class _Simplex:
    """Bounded-variable revised simplex over [A_eq; A_ub + slacks] x = b."""

    def __init__(self, lp: LinearProgram, tol: float, max_pivots: int):
        n = lp.n_vars
        m_eq, m_ub = lp.b_eq.size, lp.b_ub.size
        self.m = m_eq + m_ub
        self.m_eq, self.m_ub = m_eq, m_ub
        self.n_struct = n + m_ub  # structural + slack
        A = np.zeros((self.m, self.n_struct + self.m))
        A[:m_eq, :n] = lp.a_eq
        A[m_eq:, :n] = lp.a_ub
        A[m_eq:, n:n + m_ub] = np.eye(m_ub)
        self.A = np.asfortranarray(A)  # column slices feed the basis solves
        self.b = np.concatenate([lp.b_eq, lp.b_ub])
        self.lo = np.concatenate([lp.lo, np.zeros(m_ub), np.zeros(self.m)])
        self.hi = np.concatenate([lp.hi, np.full(m_ub, np.inf), np.full(self.m, np.inf)])
        self.c = np.concatenate([lp.c, np.zeros(m_ub + self.m)])
        self.tol = tol
        self.max_pivots = max_pivots
        self.n_total = self.n_struct + self.m
        self.art = np.arange(self.n_struct, self.n_total)
        self.pivots = 0
        self.scale = max(1.0, float(np.max(np.abs(self.b))) if self.b.size else 1.0)
        self._movable = (self.hi - self.lo) > 0.0
        self.start_hint = lp.start
        self._since_refresh = 0

    # -- basis bookkeeping ---------------------------------------------------

    def _refresh(self):
        self._since_refresh = 0
        B = self.A[:, self.basis]
        try:
            self.binv = np.linalg.inv(B)
        except np.linalg.LinAlgError:
            self.binv = np.linalg.pinv(B)
        self._recompute_xb()

    def _recompute_xb(self):
        rhs = self.b - self.A[:, :].dot(self.xn_full())
        self.xb = self.binv.dot(rhs)

    def xn_full(self) -> np.ndarray:
        x = self.xn.copy()
        x[self.basis] = 0.0
        return x

    def _value_of(self, j: int) -> float:
        st = self.status[j]
        if st == _AT_LO:
            return self.lo[j]
        if st == _AT_HI:
            return self.hi[j]
        return 0.0

    def _start_basis(self):
        self.status = np.full(self.n_total, _AT_LO, dtype=np.int8)
        self.xn = np.zeros(self.n_total)
        hint = self.start_hint
        for j in range(self.n_struct):
            lo_f, hi_f = np.isfinite(self.lo[j]), np.isfinite(self.hi[j])
            at_hi = False
            if hint is not None and j < hint.size and lo_f and hi_f:
                at_hi = abs(hint[j] - self.hi[j]) < abs(hint[j] - self.lo[j])
            elif hint is not None and j < hint.size and hi_f and not lo_f:
                at_hi = True
            if lo_f and not at_hi:
                self.status[j] = _AT_LO
                self.xn[j] = self.lo[j]
            elif hi_f:
                self.status[j] = _AT_HI
                self.xn[j] = self.hi[j]
            else:
                self.status[j] = _FREE
                self.xn[j] = 0.0
        # crash order per row: satisfied-slack, then a structural singleton
        # column that absorbs the residual within its bounds, else a signed
        # artificial.  Split-form reformulations are covered by the singleton
        # pass, which keeps the start feasible and generically non-degenerate.
        n_real = self.n_struct - self.m_ub
        resid = self.b - self.A[:, :n_real].dot(self.xn[:n_real])
        col_nnz = np.count_nonzero(self.A[:, :n_real], axis=0)
        basis = []
        for i in range(self.m):
            slack_j = n_real + (i - self.m_eq)
            if i >= self.m_eq and resid[i] >= 0.0:
                basis.append(slack_j)
                self.status[slack_j] = _BASIC
                continue
            picked = -1
            row = self.A[i, :n_real]
            for j in np.flatnonzero(row):
                if col_nnz[j] != 1 or self.status[j] == _BASIC or self.xn[j] != 0.0:
                    continue
                val = resid[i] / row[j]
                if self.lo[j] - 1e-12 <= val <= self.hi[j] + 1e-12:
                    picked = j
                    break
            if picked >= 0:
                basis.append(picked)
                self.status[picked] = _BASIC
                continue
            art_j = self.art[i]
            self.A[i, art_j] = 1.0 if resid[i] >= 0.0 else -1.0
            basis.append(art_j)
            self.status[art_j] = _BASIC
        self.basis = np.array(basis)
        self._refresh()

    # -- pricing and ratio test ------------------------------------------------

    def _duals(self, costs):
        return self.binv.T.dot(costs[self.basis])

    def _price(self, costs, bland):
        y = self._duals(costs)
        z = np.empty(self.n_total)
        ns = self.n_struct
        z[:ns] = costs[:ns] - y.dot(self.A[:, :ns])
        z[ns:] = 0.0  # artificials never re-enter
        movable = self._movable
        st = self.status
        score = np.zeros(self.n_total)
        lo_mask = movable & (st == _AT_LO) & (z < -_PIVOT_TOL)
        hi_mask = movable & (st == _AT_HI) & (z > _PIVOT_TOL)
        fr_mask = movable & (st == _FREE) & (np.abs(z) > _PIVOT_TOL)
        score[lo_mask] = z[lo_mask]
        score[hi_mask] = -z[hi_mask]
        score[fr_mask] = -np.abs(z[fr_mask])
        eligible = np.flatnonzero(score < -self.tol * 1e-2)
        if eligible.size == 0:
            return -1, z
        if bland:
            return int(eligible[0]), z
        return int(eligible[np.argmin(score[eligible])]), z

    def _ratio_test(self, j, direction):
        # entering j moves by t*direction (+1 from lower/free, -1 from upper)
        d = self.binv.dot(self.A[:, j]) * direction
        rng = self.hi[j] - self.lo[j]
        t_flip = rng if np.isfinite(rng) else np.inf
        lob = self.lo[self.basis]
        hib = self.hi[self.basis]
        t = np.full(self.m, np.inf)
        pos = (d > _PIVOT_TOL) & np.isfinite(lob)
        neg = (d < -_PIVOT_TOL) & np.isfinite(hib)
        t[pos] = np.maximum((self.xb[pos] - lob[pos]) / d[pos], 0.0)
        t[neg] = np.maximum((self.xb[neg] - hib[neg]) / d[neg], 0.0)
        t_min = float(np.min(t)) if self.m else np.inf
        if t_flip <= t_min:
            return t_flip, -1, d
        if not np.isfinite(t_min):
            return np.inf, -1, d
        ties = np.flatnonzero(t <= t_min + 1e-9 * (1.0 + t_min))
        if self.bland_mode:
            leave = int(ties[np.argmin(self.basis[ties])])
        else:  # stability: biggest pivot magnitude, then smallest index
            mags = np.abs(d[ties])
            big = ties[mags >= 0.9 * float(np.max(mags))]
            leave = int(big[np.argmin(self.basis[big])])
        return max(float(t[leave]), 0.0), leave, d

    def _pivot(self, j, direction, t, leave, d):
        if leave == -1:  # bound flip, basis unchanged
            self.status[j] = _AT_HI if self.status[j] == _AT_LO else _AT_LO
            self.xn[j] = self._value_of(j)
            self.xb -= d * t
            return
        bi = self.basis[leave]
        self.xb -= d * t
        enter_val = self._value_of(j) + direction * t
        leaving_to_hi = d[leave] < 0  # d carries the direction; <0 means it rose to hi
        self.status[bi] = _AT_HI if leaving_to_hi else _AT_LO
        # free variables only leave at +-inf bounds, which never win the ratio test
        self.xn[bi] = self._value_of(bi)
        self.basis[leave] = j
        self.status[j] = _BASIC
        self.xb[leave] = enter_val
        piv = d[leave] * direction  # = (binv A_j)[leave]
        row = self.binv[leave, :] / piv
        col = d * direction  # = binv A_j
        col = col.copy()
        col[leave] = 0.0
        self.binv -= col[:, None] * row[None, :]
        self.binv[leave, :] = row
        self.pivots += 1
        self._since_refresh += 1
        if self._since_refresh >= REFRESH_EVERY or abs(piv) < 1e-7:
            self._refresh()

    # -- the driver ------------------------------------------------------------

    def _optimize(self, costs):
        stall, last_obj = 0, math.inf
        self.bland_mode = False
        while True:
            if self.pivots >= self.max_pivots:
                raise IterationLimitError(
                    f"pivot limit {self.max_pivots} reached",
                    best=dict(objective=float(costs[self.basis].dot(self.xb)
                                              + costs.dot(self.xn_full()))))
            j, z = self._price(costs, self.bland_mode)
            if j < 0:
                return z
            direction = -1.0 if self.status[j] == _AT_HI else 1.0
            if self.status[j] == _FREE and z[j] > 0:
                direction = -1.0
            t, leave, d = self._ratio_test(j, direction)
            if not np.isfinite(t):
                ray = np.zeros(self.n_total)
                ray[j] = direction
                ray[self.basis] = -self.binv.dot(self.A[:, j]) * direction
                raise LpUnboundedError("objective unbounded along a feasible ray", ray=ray)
            self._pivot(j, direction, t, leave, d)
            obj = float(costs[self.basis].dot(self.xb) + costs.dot(self.xn_full()))
            if obj < last_obj - self.tol * 1e-3 * self.scale:
                last_obj, stall, self.bland_mode = obj, 0, False
            else:
                stall += 1
                if stall > max(64, 2 * self.m):
                    self.bland_mode = True  # Bland's rule until progress resumes

    def solve(self):
        self._start_basis()
        phase1 = np.zeros(self.n_total)
        phase1[self.art] = 1.0
        self._optimize(phase1)
        infeas = float(sum(abs(self.xb[i]) for i in range(self.m)
                           if self.basis[i] >= self.n_struct))
        if infeas > _FEAS_TOL * self.scale * 10:
            y = self._duals(phase1)
            raise LpInfeasibleError(
                f"infeasible: phase-1 objective {infeas:.3e}",
                farkas_y=y, infeasibility=infeas)
        # freeze any residual artificials at zero
        self.lo[self.art] = 0.0
        self.hi[self.art] = 0.0
        self._movable[self.art] = False
        for j in self.art:
            if self.status[j] != _BASIC:
                self.status[j] = _AT_LO
                self.xn[j] = 0.0
        self._refresh()
        z = self._optimize(self.c)
        self._refresh()  # tighten residuals before certifying
        y = self._duals(self.c)
        z = self.c - y.dot(self.A)
        return y, z


def _dual_objective(lp: LinearProgram, y: np.ndarray, z: np.ndarray,
                    n: int, m_ub: int, tol: float) -> float:
    b = np.concatenate([lp.b_eq, lp.b_ub])
    total = float(y.dot(b))
    lo = np.concatenate([lp.lo, np.zeros(m_ub)])
    hi = np.concatenate([lp.hi, np.full(m_ub, np.inf)])
    for j in range(n + m_ub):
        zj = z[j]
        if abs(zj) <= tol:
            continue
        cand = zj * lo[j] if zj > 0 else zj * hi[j]
        if not np.isfinite(cand):
            cand = -abs(zj)  # dual infeasibility at this tolerance; penalize
        total += cand
    return total


def solve_lp(lp: LinearProgram, tol: float = 1e-8,
             max_pivots: int | None = None) -> SolveResult:
    """Solve a dense LP and certify the result with an explicit duality gap.

    Raises ``LpInfeasibleError`` (with a Farkas row combination ``y``: the row
    combination proves max over the box of (y'A)x falls short of y'b),
    ``LpUnboundedError`` (with an improving ray), or ``IterationLimitError``.
    """
    n = lp.n_vars
    m = lp.b_eq.size + lp.b_ub.size
    if max_pivots is None:
        max_pivots = 2000 + 40 * (m + n)
    sx = _Simplex(lp, tol, max_pivots)
    try:
        y, z = sx.solve()
    except LpUnboundedError as exc:
        if exc.ray is not None and exc.ray.size > n:
            raise LpUnboundedError(str(exc), ray=exc.ray[:n]) from None
        raise
    x_full = sx.xn_full()
    x_full[sx.basis] = sx.xb
    x = x_full[:n]
    # duals of <= rows carry the slack sign convention (y <= 0 here means binding)
    value = float(lp.c.dot(x)) + lp.offset
    dual_val = _dual_objective(lp, y, z[:n + lp.b_ub.size], n, lp.b_ub.size,
                               max(tol, 1e-11)) + lp.offset
    gap = abs(value - dual_val)
    # primal residuals
    r_eq = 0.0 if lp.b_eq.size == 0 else float(np.max(np.abs(lp.a_eq.dot(x) - lp.b_eq)))
    r_ub = 0.0 if lp.b_ub.size == 0 else float(np.max(np.maximum(lp.a_ub.dot(x) - lp.b_ub, 0.0)))
    r_bnd = float(np.max(np.maximum(lp.lo - x, 0.0)) + np.max(np.maximum(x - lp.hi, 0.0)))
    resid = max(r_eq, r_ub, r_bnd)
    if resid > tol * (1.0 + sx.scale) or gap > tol * (1.0 + abs(value)):
        raise LpError(
            f"certificate check failed: residual {resid:.3e}, gap {gap:.3e}")
    return SolveResult(x=x, value=value, gap=gap, certificate=CertificateKind.DUAL_PAIR,
                       iterations=sx.pivots, dual=y, reduced_costs=z[:n])


def lp_to_text(lp: LinearProgram) -> str:
    """Render the program in CPLEX LP text format (developer cross-checking aid)."""
    names = lp.names or [f"x{j}" for j in range(lp.n_vars)]

    def expr(row):
        parts = []
        for j, a in enumerate(row):
            if a == 0.0:
                continue
            parts.append(f"{'+' if a >= 0 else '-'} {abs(a):.17g} {names[j]}")
        return " ".join(parts) if parts else "0 " + names[0]

    out = io.StringIO()
    out.write("Minimize\n obj: ")
    out.write(expr(lp.c))
    if lp.offset:
        out.write(f" + {lp.offset:.17g}")
    out.write("\nSubject To\n")
    for i, (row, rhs) in enumerate(zip(lp.a_eq, lp.b_eq)):
        out.write(f" e{i}: {expr(row)} = {rhs:.17g}\n")
    for i, (row, rhs) in enumerate(zip(lp.a_ub, lp.b_ub)):
        out.write(f" i{i}: {expr(row)} <= {rhs:.17g}\n")
    out.write("Bounds\n")
    for j in range(lp.n_vars):
        lo = "-inf" if not np.isfinite(lp.lo[j]) else f"{lp.lo[j]:.17g}"
        hi = "+inf" if not np.isfinite(lp.hi[j]) else f"{lp.hi[j]:.17g}"
        out.write(f" {lo} <= {names[j]} <= {hi}\n")
    out.write("End\n")
    return out.getvalue()
