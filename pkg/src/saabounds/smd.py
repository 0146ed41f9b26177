"""Stochastic mirror descent baseline used for the accuracy-vs-sample-size curves.

One pass over N scenarios with the entropy prox on the simplex block (plus a
clipped Euclidean step on the threshold coordinate for the mixed CVaR domain)
and uniform averaging of the iterates.  Each run records the trajectory sums
needed to verify the realized regret certificate

    (1/N) sum_t <g_t, x_t - u>  <=  V_0(u)/(step*N) + (step/(2N)) sum_t ||g_t||_*^2

for any fixed comparator u, which is checked per run by the test-suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import prox_entropy
from .problems import InstanceKind, ProblemInstance, philox_rng, sample

__all__ = ["SmdRun", "run_smd", "smd_step_scale"]


@dataclass(frozen=True)
class SmdRun:
    step_scale: float
    iterates_avg: np.ndarray
    trajectory_summary: tuple          # ((t, objective at running average), ...)
    sum_grad_dot_x: float              # sum_t <g_t, x_t>
    sum_grad: np.ndarray               # sum_t g_t
    sum_dual_norm_sq: float            # sum_t ||g_t||_*^2
    start_point: np.ndarray
    N: int
    mixed_domain: bool = False

    def regret(self, u: np.ndarray) -> float:
        """Averaged linearized regret (1/N) sum_t <g_t, x_t - u>."""
        return (self.sum_grad_dot_x - float(self.sum_grad.dot(u))) / self.N

    def regret_bound(self, u: np.ndarray) -> float:
        """Certificate right-hand side for comparator ``u``."""
        v0 = _bregman_from_start(self.start_point, u, self.mixed_domain)
        return v0 / (self.step_scale * self.N) + \
            self.step_scale * self.sum_dual_norm_sq / (2.0 * self.N)


def _bregman_from_start(x0: np.ndarray, u: np.ndarray, mixed: bool) -> float:
    # start is uniform on the simplex block; threshold block is quadratic
    if x0.size != u.size:
        raise ValueError("comparator dimension mismatch")
    if not mixed:
        with np.errstate(divide="ignore"):
            terms = np.where(u > 0.0, u * np.log(np.maximum(u, 1e-300) / x0), 0.0)
        return float(np.sum(terms))
    # mixed layout [allocation..., threshold]
    alloc_u, thr_u = u[:-1], u[-1]
    alloc_0, thr_0 = x0[:-1], x0[-1]
    with np.errstate(divide="ignore"):
        terms = np.where(alloc_u > 0.0,
                         alloc_u * np.log(np.maximum(alloc_u, 1e-300) / alloc_0), 0.0)
    return float(np.sum(terms)) + 0.5 * (thr_u - thr_0) ** 2


def smd_step_scale(instance: ProblemInstance, N: int) -> float:
    """Constant step 2*R*Omega/(M2*sqrt(N)): the radius- and noise-tuned choice."""
    geo = instance.geometry
    return 2.0 * geo.radius * geo.omega_cap / (instance.constants.m2 * math.sqrt(N))


def _subgradient(instance: ProblemInstance, x: np.ndarray, xi_row: np.ndarray) -> np.ndarray:
    kind = instance.kind
    if kind is InstanceKind.QUADRATIC_RISK:
        z = float(xi_row.dot(x))
        return (instance.kappa0 + instance.kappa1 * z) * xi_row
    if kind is InstanceKind.GAUSSIAN_VAR:
        z = float(xi_row.dot(x))
        k0 = 0.0 if instance.drop_zero_mean else instance.kappa0
        return (k0 + instance.kappa1 * math.copysign(1.0, z)) * xi_row
    if kind is InstanceKind.CVAR:
        alloc, thr = x[:-1], x[-1]
        z = float(xi_row.dot(alloc))
        live = 1.0 if z > thr else 0.0
        g_alloc = (instance.kappa0 + instance.kappa1 * live / instance.eps_cvar) * xi_row
        g_thr = instance.kappa1 * (1.0 - live / instance.eps_cvar)
        return np.concatenate([g_alloc, [g_thr]])
    raise TypeError(f"no stochastic subgradient for instance kind {kind!r}")


def _dual_norm_sq(instance: ProblemInstance, g: np.ndarray) -> float:
    if instance.kind is InstanceKind.CVAR:
        return float(np.max(np.abs(g[:-1]))) ** 2 + g[-1] ** 2
    return float(np.max(np.abs(g))) ** 2


def run_smd(instance: ProblemInstance, N: int, seed: int = 0, stream: int = 0,
            rng: np.random.Generator | None = None,
            record_objective=None) -> SmdRun:
    """One SMD pass of length N; deterministic given (seed, stream).

    ``record_objective`` (optional callable of the running average) is
    evaluated at dyadic checkpoints into the trajectory summary.
    """
    rng = rng or philox_rng(seed, stream)
    xi = sample(instance, N, rng=rng).xi
    mixed = instance.kind is InstanceKind.CVAR
    if mixed:
        n_alloc = instance.theta.size
        x = np.concatenate([np.full(n_alloc, 1.0 / n_alloc), [0.0]])
    else:
        x = np.full(instance.n, 1.0 / instance.n)
    start = x.copy()
    step = smd_step_scale(instance, N)
    avg = np.zeros_like(x)
    sum_gx = 0.0
    sum_g = np.zeros_like(x)
    sum_nrm = 0.0
    checkpoints = []
    next_check = 1
    for t in range(N):
        g = _subgradient(instance, x, xi[t])
        sum_gx += float(g.dot(x))
        sum_g += g
        sum_nrm += _dual_norm_sq(instance, g)
        avg += (x - avg) / (t + 1)
        if record_objective is not None and t + 1 == next_check:
            checkpoints.append((t + 1, float(record_objective(avg))))
            next_check *= 2
        if mixed:
            alloc = prox_entropy(x[:-1], -g[:-1], step)
            thr = min(max(x[-1] - step * g[-1], -1.0), 1.0)
            x = np.concatenate([alloc, [thr]])
        else:
            x = prox_entropy(x, -g, step)
    return SmdRun(step_scale=step, iterates_avg=avg,
                  trajectory_summary=tuple(checkpoints),
                  sum_grad_dot_x=sum_gx, sum_grad=sum_g,
                  sum_dual_norm_sq=sum_nrm, start_point=start, N=N,
                  mixed_domain=mixed)
