"""Norm/prox machinery: distance-generating functions, their curvature caps, and prox maps.

Everything downstream (bound formulas, mirror descent, the hard-case construction)
is parameterized by a norm together with a compatible distance-generating function
(DGF).  Three setups are supported:

* ``L1``    -- the l1 ball / standard simplex, power DGF ``(1/(p*gamma)) sum |x_i|^p``;
* ``L2``    -- the Euclidean ball, ``omega(x) = ||x||^2 / 2``;
* ``MixedBoxSimplex`` -- the CVaR decision domain ``[-1,1] x simplex`` with the
  product norm ``sqrt(x0^2 + ||x'||_1^2)``.

``omega_cap`` is the maximum of ``sqrt(2*omega)`` over the corresponding unit ball
and ``radius`` the smallest norm-ball radius containing the feasible set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "NormKind",
    "GeometrySpec",
    "GeometryError",
    "ProxConvergenceError",
    "omega_l1",
    "omega_mixed",
    "dgf_params",
    "euclidean_spec",
    "simplex_l1_spec",
    "mixed_spec",
    "dual_norm",
    "primal_norm",
    "dgf_value",
    "dgf_gradient",
    "prox_entropy",
    "prox_power",
]


class GeometryError(ValueError):
    """Invalid dimension or norm/DGF parameter."""


class ProxConvergenceError(RuntimeError):
    """The 1-D multiplier search inside a prox map failed to bracket or converge."""

    def __init__(self, message, iterates=None):
        super().__init__(message)
        self.iterates = iterates


class NormKind(Enum):
    L1 = "l1"
    L2 = "l2"
    MIXED = "mixed_box_simplex"


def dgf_params(n: int) -> tuple[float, float]:
    """Exponent ``p`` and scale ``gamma`` of the power DGF on the l1 ball."""
    if n < 1:
        raise GeometryError(f"dimension must be >= 1, got {n}")
    if n <= 2:
        p = 2.0
        gamma = 1.0 if n == 1 else 0.5
    else:
        p = 1.0 + 1.0 / math.log(n)
        gamma = 1.0 / (math.e * math.log(n))
    return p, gamma


def omega_l1(n: int) -> float:
    """Curvature cap for the l1 geometry: 1, sqrt(2), then ln(n)*sqrt(2e/(1+ln n))."""
    if n < 1:
        raise GeometryError(f"dimension must be >= 1, got {n}")
    if n == 1:
        return 1.0
    if n == 2:
        return math.sqrt(2.0)
    ln = math.log(n)
    return ln * math.sqrt(2.0 * math.e / (1.0 + ln))


def omega_mixed(n: int) -> float:
    """Curvature cap for the box-times-simplex geometry (n = number of assets).

    ``n = 0`` is the degenerate single-asset convention (the simplex part is the
    constant 1), where the cap reduces to that of the box alone.
    """
    if n < 0:
        raise GeometryError(f"asset count must be >= 0, got {n}")
    if n == 0:
        return 1.0
    if n == 1:
        return math.sqrt(2.0)
    if n == 2:
        return math.sqrt(3.0)
    ln = math.log(n)
    return math.sqrt(1.0 + 2.0 * math.e * ln * ln / (1.0 + ln))


@dataclass(frozen=True)
class GeometrySpec:
    """A norm, a compatible DGF, and the two scalars the bound formulas consume.

    ``degenerate_simplex`` marks the CVaR ``n = 0`` convention: the asset block is
    the fixed scalar 1 rather than a dimension-zero simplex.
    """

    norm_kind: NormKind
    dimension: int
    omega_cap: float
    radius: float
    dgf_p: float
    dgf_gamma: float
    degenerate_simplex: bool = False

    def __post_init__(self):
        if self.dimension < 1:
            raise GeometryError(f"dimension must be >= 1, got {self.dimension}")
        if self.dgf_p <= 1.0:
            raise GeometryError(f"DGF exponent must exceed 1, got {self.dgf_p}")
        if self.dgf_gamma <= 0.0:
            raise GeometryError(f"DGF scale must be positive, got {self.dgf_gamma}")
        if self.omega_cap <= 0.0 or self.radius <= 0.0:
            raise GeometryError("omega_cap and radius must be positive")


def simplex_l1_spec(n: int) -> GeometrySpec:
    """Geometry for the standard simplex in the l1 norm (R = 1)."""
    p, gamma = dgf_params(n)
    return GeometrySpec(NormKind.L1, n, omega_l1(n), 1.0, p, gamma)


def euclidean_spec(n: int, radius: float = 1.0) -> GeometrySpec:
    """Euclidean geometry: omega(x) = ||x||^2/2, so the cap is exactly 1."""
    return GeometrySpec(NormKind.L2, n, 1.0, radius, 2.0, 1.0)


def mixed_spec(n: int) -> GeometrySpec:
    """Geometry for the CVaR domain [-1,1] x simplex(n); R = sqrt(2) for n >= 1."""
    if n == 0:
        return GeometrySpec(NormKind.MIXED, 1, 1.0, 1.0, 2.0, 1.0,
                            degenerate_simplex=True)
    p, gamma = dgf_params(n)
    return GeometrySpec(NormKind.MIXED, n + 1, omega_mixed(n), math.sqrt(2.0), p, gamma)


def primal_norm(x: np.ndarray, spec: GeometrySpec) -> float:
    x = np.asarray(x, dtype=float)
    if spec.norm_kind is NormKind.L1:
        return float(np.sum(np.abs(x)))
    if spec.norm_kind is NormKind.L2:
        return float(np.linalg.norm(x))
    return float(math.hypot(x[0], np.sum(np.abs(x[1:]))))


def dual_norm(y: np.ndarray, spec: GeometrySpec) -> float:
    y = np.asarray(y, dtype=float)
    if spec.norm_kind is NormKind.L1:
        return float(np.max(np.abs(y)))
    if spec.norm_kind is NormKind.L2:
        return float(np.linalg.norm(y))
    tail = 0.0 if y.size == 1 else float(np.max(np.abs(y[1:])))
    return float(math.hypot(y[0], tail))


def dgf_value(x: np.ndarray, spec: GeometrySpec) -> float:
    x = np.asarray(x, dtype=float)
    if spec.norm_kind is NormKind.MIXED:
        p, g = spec.dgf_p, spec.dgf_gamma
        return float(0.5 * x[0] ** 2 + np.sum(np.abs(x[1:]) ** p) / (p * g))
    p, g = spec.dgf_p, spec.dgf_gamma
    return float(np.sum(np.abs(x) ** p) / (p * g))


def dgf_gradient(x: np.ndarray, spec: GeometrySpec) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if spec.norm_kind is NormKind.MIXED:
        p, g = spec.dgf_p, spec.dgf_gamma
        out = np.empty_like(x)
        out[0] = x[0]
        out[1:] = np.sign(x[1:]) * np.abs(x[1:]) ** (p - 1.0) / g
        return out
    p, g = spec.dgf_p, spec.dgf_gamma
    return np.sign(x) * np.abs(x) ** (p - 1.0) / g


def prox_entropy(x: np.ndarray, g: np.ndarray, step: float) -> np.ndarray:
    """Entropy-DGF prox on the simplex: argmin_y [V_x(y) - step*<g, y>].

    The minimizer is the normalized multiplicative update ``x * exp(step*g)``;
    note the sign convention (mass moves toward large components of ``g``), so a
    descent step passes the negated subgradient.
    """
    x = np.asarray(x, dtype=float)
    g = np.asarray(g, dtype=float)
    if not np.all(np.isfinite(g)):
        raise GeometryError("non-finite entries in the dual vector")
    if np.any(x <= 0.0):
        raise GeometryError("prox_entropy requires a strictly positive simplex point")
    z = step * g
    z = z - np.max(z)  # shift invariance; avoids overflow
    y = x * np.exp(z)
    return y / np.sum(y)


def _power_inverse(a: np.ndarray, p: float, gamma: float) -> np.ndarray:
    # inverse of the per-coordinate map t -> |t|^(p-1) sign(t) / gamma
    return np.sign(a) * (gamma * np.abs(a)) ** (1.0 / (p - 1.0))


def prox_power(x: np.ndarray, g: np.ndarray, step: float,
               spec: GeometrySpec, tol: float = 1e-12) -> np.ndarray:
    """Power-DGF prox on the unit norm ball: argmin_{||y||<=1} V_x(y) + step*<g, y>.

    The ball constraint is handled through its Lagrange multiplier; the
    multiplier is found by safeguarded bisection on the constraint residual
    (there is no closed form for p != 2).
    """
    x = np.asarray(x, dtype=float)
    g = np.asarray(g, dtype=float)
    if not np.all(np.isfinite(g)):
        raise GeometryError("non-finite entries in the dual vector")
    p, gamma = spec.dgf_p, spec.dgf_gamma
    a = dgf_gradient(x, spec) - step * g  # target dual point (l1/l2 branch only)

    if spec.norm_kind is NormKind.L2:
        # omega'(y) = y/gamma; constraint ||y|| <= 1 just rescales
        y = gamma * a
        nrm = float(np.linalg.norm(y))
        return y if nrm <= 1.0 else y / nrm

    if spec.norm_kind is not NormKind.L1:
        raise GeometryError(f"prox_power supports L1/L2 geometries, not {spec.norm_kind}")

    y = _power_inverse(a, p, gamma)
    if np.sum(np.abs(y)) <= 1.0:
        return y

    # shrink |a| by nu >= 0 until the l1 norm hits 1; monotone in nu
    def norm_at(nu):
        return float(np.sum(np.abs(_power_inverse(
            np.sign(a) * np.maximum(np.abs(a) - nu, 0.0), p, gamma))))

    lo, hi = 0.0, float(np.max(np.abs(a)))
    if norm_at(hi) > 1.0:  # cannot happen: norm_at(max|a|) = 0
        raise ProxConvergenceError("failed to bracket the ball multiplier",
                                   iterates=[(lo, norm_at(lo)), (hi, norm_at(hi))])
    trace = []
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        r = norm_at(mid)
        trace.append((mid, r))
        if r > 1.0:
            lo = mid
        else:
            hi = mid
        if abs(r - 1.0) <= tol:
            break
    else:
        if abs(norm_at(0.5 * (lo + hi)) - 1.0) > 1e-6:
            raise ProxConvergenceError(
                "ball-multiplier bisection did not converge", iterates=trace)
    nu = 0.5 * (lo + hi)
    return _power_inverse(np.sign(a) * np.maximum(np.abs(a) - nu, 0.0), p, gamma)
