"""Closed-form confidence machinery for SAA optimal values.

The two deviation bounds

    Prob{ Opt_N > Opt + a(mu, N) }            <= exp(-mu^2 / (4 tau*))
    Prob{ Opt_N < Opt - b(mu, s, lambda, N) } <= exp(-N(s^2-1)) + exp(-mu^2/(4 tau*))
                                                 + exp(-lambda^2/(4 tau*))

with  a(mu,N) = mu*M1/sqrt(N)  and  b = (mu*M1 + [Omega(1+s^2)+2*lambda]*M2*R)/sqrt(N)
turn an SAA value into a two-sided confidence interval whose risk is the
four-term sum ``risk_beta``.  This module also carries the matching minimax and
constrained-problem risk expressions, the information-theoretic width floor, and
the normal CDF/quantile pair everything relies on.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

from .geometry import GeometrySpec

__all__ = [
    "BoundParams",
    "MomentConstants",
    "ConfidenceInterval",
    "CiMethod",
    "ParameterRangeError",
    "InfeasibleRiskError",
    "normal_cdf",
    "normal_quantile",
    "tau_star",
    "gamma_lower_bound",
    "deviation_risk",
    "bound_a",
    "bound_b",
    "risk_beta",
    "risk_beta_terms",
    "ci_saa_theoretical",
    "ci_asymptotic",
    "ci_saa_experimental",
    "optimize_ci_params",
    "ci_width",
    "lower_width",
    "ratio_table1",
    "risks_minimax",
    "underestimator_feasible",
    "theta_lower_bound",
]


class ParameterRangeError(ValueError):
    """A deviation parameter left its validity interval."""


class InfeasibleRiskError(ValueError):
    """No parameter choice attains the requested risk within the validity box."""


# ---------------------------------------------------------------------------
# normal distribution

def normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


_ACKLAM_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
             1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_ACKLAM_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
             6.680131188771972e+01, -1.328068155288572e+01)
_ACKLAM_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
             -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_ACKLAM_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
             3.754408661907416e+00)


def normal_quantile(p: float) -> float:
    """Standard normal quantile, rational approximation plus two Newton steps.

    Accurate to ~1e-13 over (0, 1); the Newton refinement uses the erfc-based CDF.
    """
    if not 0.0 < p < 1.0:
        raise ParameterRangeError(f"quantile level must lie in (0,1), got {p}")
    a, b, c, d = _ACKLAM_A, _ACKLAM_B, _ACKLAM_C, _ACKLAM_D
    p_low, p_high = 0.02425, 1.0 - 0.02425
    if p < p_low:
        q = math.sqrt(-2.0 * math.log(p))
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    elif p <= p_high:
        q = p - 0.5
        r = q * q
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q / \
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)
    else:
        q = math.sqrt(-2.0 * math.log1p(-p))
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    for _ in range(2):
        err = normal_cdf(x) - p
        x -= err * math.sqrt(2.0 * math.pi) * math.exp(0.5 * x * x)
    return x


# ---------------------------------------------------------------------------
# the sub-Gaussian constant tau*

@lru_cache(maxsize=1)
def tau_star() -> float:
    """Smallest tau with exp(t) <= t + exp(tau*t^2) for every real t.

    At the optimum the gap function h(t) = exp(tau*t^2) + t - exp(t) has a
    second, interior double root besides the one pinned at t = 0; tau* solves
    h = h' = 0 there.  Bisection on the interior minimum localizes the pair,
    Newton on the 2x2 system polishes it to full precision.
    """

    def interior_min(tau):
        ts = [0.5 + k * 7.5 / 2000 for k in range(2001)]
        vals = [math.exp(tau * t * t) + t - math.exp(t) for t in ts]
        i = vals.index(min(vals))
        a, b = ts[max(i - 1, 0)], ts[min(i + 1, 2000)]
        gr = (math.sqrt(5.0) - 1.0) / 2.0
        h = lambda t: math.exp(tau * t * t) + t - math.exp(t)
        c, d = b - gr * (b - a), a + gr * (b - a)
        for _ in range(120):
            if h(c) < h(d):
                b, d = d, c
                c = b - gr * (b - a)
            else:
                a, c = c, d
                d = a + gr * (b - a)
        t0 = 0.5 * (a + b)
        return h(t0), t0

    lo, hi = 0.5, 0.7
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if interior_min(mid)[0] < 0.0:
            lo = mid
        else:
            hi = mid
    tau = 0.5 * (lo + hi)
    t = interior_min(tau)[1]
    for _ in range(40):
        e_tt = math.exp(tau * t * t)
        e_t = math.exp(t)
        f1 = e_tt + t - e_t
        f2 = 2.0 * tau * t * e_tt + 1.0 - e_t
        j11 = 2.0 * tau * t * e_tt + 1.0 - e_t
        j12 = t * t * e_tt
        j21 = (2.0 * tau + 4.0 * tau * tau * t * t) * e_tt - e_t
        j22 = (2.0 * t + 2.0 * tau * t ** 3) * e_tt
        det = j11 * j22 - j12 * j21
        dt = (-f1 * j22 + f2 * j12) / det
        dtau = (-j11 * f2 + j21 * f1) / det
        t += dt
        tau += dtau
        if max(abs(dt), abs(dtau)) < 1e-16:
            break
    return tau


def gamma_lower_bound() -> float:
    """The scale gamma with E exp(gamma^2 Z^2) = e for standard normal Z."""
    return math.sqrt(0.5 * (1.0 - math.exp(-2.0)))


# ---------------------------------------------------------------------------
# parameter containers

@dataclass(frozen=True)
class MomentConstants:
    """Orlicz-type scales: m1 caps value deviations, m2 caps subgradient deviations."""

    m1: float
    m2: float

    def __post_init__(self):
        if not (math.isfinite(self.m1) and self.m1 > 0.0):
            raise ParameterRangeError(f"m1 must be finite and positive, got {self.m1}")
        if not (math.isfinite(self.m2) and self.m2 > 0.0):
            raise ParameterRangeError(f"m2 must be finite and positive, got {self.m2}")


def _check_mu(value: float, N: int, name: str) -> None:
    cap = 2.0 * math.sqrt(tau_star() * N)
    if not 0.0 <= value <= cap * (1.0 + 1e-12):
        raise ParameterRangeError(
            f"{name}={value} outside the admissible interval [0, 2*sqrt(tau*N)] = [0, {cap:.6f}]")


@dataclass(frozen=True)
class BoundParams:
    """Free parameters of the two-sided SAA interval (mu1, mu2, s, lambda, N)."""

    mu1: float
    mu2: float
    s: float
    lam: float
    N: int

    def __post_init__(self):
        if self.N < 1:
            raise ParameterRangeError(f"sample size must be >= 1, got {self.N}")
        if self.s < 1.0:
            raise ParameterRangeError(f"s must be >= 1 (s=1 only as a limit), got {self.s}")
        _check_mu(self.mu1, self.N, "mu1")
        _check_mu(self.mu2, self.N, "mu2")
        _check_mu(self.lam, self.N, "lambda")


class CiMethod(Enum):
    SAA = "saa"
    ASYMPTOTIC = "asymptotic"


@dataclass(frozen=True)
class ConfidenceInterval:
    low: float
    up: float
    level: float
    method: CiMethod
    degenerate: bool = False

    def __post_init__(self):
        if self.low > self.up:
            raise ParameterRangeError(f"interval endpoints out of order: [{self.low}, {self.up}]")

    @property
    def width(self) -> float:
        return self.up - self.low

    def contains(self, value: float) -> bool:
        return self.low <= value <= self.up


# ---------------------------------------------------------------------------
# deviation bounds and risks

def deviation_risk(value: float, N: int, extended: bool = False) -> float:
    """One-sided tail risk of a scaled deviation parameter.

    The main regime covers value <= 2*sqrt(tau* N) with risk exp(-value^2/(4 tau*)).
    With ``extended`` the large-deviation branch exp(-value^2/3) is used beyond
    the cap instead of raising.
    """
    if value < 0.0:
        raise ParameterRangeError(f"deviation parameter must be >= 0, got {value}")
    cap = 2.0 * math.sqrt(tau_star() * N)
    if value <= cap * (1.0 + 1e-12):
        return math.exp(-value * value / (4.0 * tau_star()))
    if extended:
        return math.exp(-value * value / 3.0)
    raise ParameterRangeError(
        f"deviation parameter {value} exceeds 2*sqrt(tau*N) = {cap:.6f}; "
        "use extended=True for the large-deviation branch")


def bound_a(mu: float, N: int, m1: float) -> float:
    """Upper-deviation margin a(mu, N) = mu*M1/sqrt(N)."""
    _check_mu(mu, N, "mu")
    return mu * m1 / math.sqrt(N)


def bound_b(mu: float, s: float, lam: float, N: int,
            consts: MomentConstants, geo: GeometrySpec) -> float:
    """Lower-deviation margin b = (mu*M1 + [Omega(1+s^2) + 2 lambda]*M2*R)/sqrt(N)."""
    if s < 1.0:
        raise ParameterRangeError(f"s must be >= 1, got {s}")
    _check_mu(mu, N, "mu")
    _check_mu(lam, N, "lambda")
    return (mu * consts.m1
            + (geo.omega_cap * (1.0 + s * s) + 2.0 * lam) * consts.m2 * geo.radius
            ) / math.sqrt(N)


def risk_beta_terms(params: BoundParams) -> tuple[float, float, float, float]:
    t4 = 4.0 * tau_star()
    return (math.exp(-params.mu1 ** 2 / t4),
            math.exp(-params.mu2 ** 2 / t4),
            math.exp(-params.N * (params.s ** 2 - 1.0)),
            math.exp(-params.lam ** 2 / t4))


def risk_beta(params: BoundParams) -> float:
    """Total interval risk: the four-term sum, clipped at 1 (clipping is warned)."""
    total = sum(risk_beta_terms(params))
    if total > 1.0:
        warnings.warn(f"interval risk {total:.4f} clipped to 1", stacklevel=2)
        return 1.0
    return total


def ci_saa_theoretical(opt_n: float, params: BoundParams,
                       consts: MomentConstants, geo: GeometrySpec) -> ConfidenceInterval:
    """Two-sided interval [Opt_N - a(mu1), Opt_N + b(mu2, s, lambda)] at level 1 - beta."""
    beta = risk_beta(params)
    if beta >= 1.0:
        raise InfeasibleRiskError("interval risk is >= 1; enlarge the parameters")
    a = bound_a(params.mu1, params.N, consts.m1)
    b = bound_b(params.mu2, params.s, params.lam, params.N, consts, geo)
    return ConfidenceInterval(opt_n - a, opt_n + b, 1.0 - beta, CiMethod.SAA)


def ci_asymptotic(values, alpha: float) -> ConfidenceInterval:
    """CLT interval from second-sample scenario costs at the SAA solution.

    Mean and (uncorrected) variance come straight from the cost values; a
    negative variance from roundoff is clamped to zero and the interval flagged
    degenerate.
    """
    vals = [float(v) for v in values]
    if not vals:
        raise ParameterRangeError("need at least one scenario cost")
    if not 0.0 < alpha < 1.0:
        raise ParameterRangeError(f"alpha must lie in (0,1), got {alpha}")
    n = len(vals)
    fhat = math.fsum(vals) / n
    var = math.fsum(v * v for v in vals) / n - fhat * fhat
    degenerate = var <= 0.0
    sig = math.sqrt(max(var, 0.0))
    half = normal_quantile(1.0 - alpha / 2.0) * sig / math.sqrt(n)
    return ConfidenceInterval(fhat - half, fhat + half, 1.0 - alpha,
                              CiMethod.ASYMPTOTIC, degenerate=degenerate)


def ci_saa_experimental(opt_n: float, fhat_2n: float, alpha: float, N: int,
                        consts: MomentConstants, geo: GeometrySpec) -> ConfidenceInterval:
    """The deployed SAA interval: certified lower bound, best-of-two upper bound.

    Lower endpoint spends alpha/2 on the upper-deviation bound.  The upper
    endpoint is the minimum of the second-sample estimate pushed up by its own
    deviation margin (risk alpha/4) and the theoretical bound tuned to risk
    alpha/4 split equally over its three terms; total documented risk <= alpha.
    """
    if not 0.0 < alpha < 1.0:
        raise ParameterRangeError(f"alpha must lie in (0,1), got {alpha}")
    ts = tau_star()
    mu1 = math.sqrt(4.0 * ts * math.log(2.0 / alpha))
    _check_mu(mu1, N, "mu1")
    low = opt_n - bound_a(mu1, N, consts.m1)
    up_prime = fhat_2n + 2.0 * consts.m1 * math.sqrt(ts * math.log(4.0 / alpha) / N)
    r = alpha / 12.0
    mu2 = lam = math.sqrt(4.0 * ts * math.log(1.0 / r))
    _check_mu(mu2, N, "mu2")
    s = math.sqrt(1.0 + math.log(1.0 / r) / N)
    up_theory = opt_n + bound_b(mu2, s, lam, N, consts, geo)
    up = min(up_prime, up_theory)
    if up < low:  # estimate noise can undercut the certified lower bound
        up = low
    return ConfidenceInterval(low, up, 1.0 - alpha, CiMethod.SAA)


# ---------------------------------------------------------------------------
# width-minimizing parameter choice and the lower-bound ratio

def ci_width(params: BoundParams, consts: MomentConstants, geo: GeometrySpec) -> float:
    return (bound_a(params.mu1, params.N, consts.m1)
            + bound_b(params.mu2, params.s, params.lam, params.N, consts, geo))


def _tied_params(alpha: float, r_s: float, N: int) -> BoundParams:
    r = (alpha - r_s) / 3.0
    mu = math.sqrt(4.0 * tau_star() * math.log(1.0 / r))
    s = math.sqrt(1.0 + math.log(1.0 / r_s) / N)
    return BoundParams(mu, mu, s, mu, N)


def optimize_ci_params(alpha: float, N: int, consts: MomentConstants,
                       geo: GeometrySpec, rule: str = "tied") -> BoundParams:
    """Pick (mu1, mu2, s, lambda) with risk_beta <= alpha and small total width.

    ``tied`` (default) keeps the three exponential-term parameters equal and
    golden-sections the slice of risk given to the s-term; this is the rule that
    reproduces the published width-ratio table.  ``equal`` gives every one of
    the four risk terms alpha/4.
    """
    if not 0.0 < alpha < 1.0:
        raise ParameterRangeError(f"alpha must lie in (0,1), got {alpha}")
    cap = 2.0 * math.sqrt(tau_star() * N)
    mu_equal = math.sqrt(4.0 * tau_star() * math.log(4.0 / alpha))
    if mu_equal > cap:
        raise InfeasibleRiskError(
            f"risk {alpha} needs mu = {mu_equal:.4f} > 2*sqrt(tau*N) = {cap:.4f}; "
            "increase N or alpha")
    if rule == "equal":
        r = alpha / 4.0
        mu = math.sqrt(4.0 * tau_star() * math.log(1.0 / r))
        s = math.sqrt(1.0 + math.log(1.0 / r) / N)
        return BoundParams(mu, mu, s, mu, N)
    if rule != "tied":
        raise ValueError(f"unknown parameter rule {rule!r}")

    mu_cap_risk = math.exp(-N)  # mu at the validity cap has this risk per term
    lo = math.log(max(alpha * 1e-14, mu_cap_risk * 1e-3))
    hi = math.log(alpha * (1.0 - 1e-12))

    def width_at(log_rs):
        r_s = math.exp(log_rs)
        r = (alpha - r_s) / 3.0
        if r <= mu_cap_risk:
            return math.inf
        return ci_width(_tied_params(alpha, r_s, N), consts, geo)

    gr = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = hi - gr * (hi - lo), lo + gr * (hi - lo)
    for _ in range(200):
        if width_at(c) < width_at(d):
            hi, d = d, c
            c = hi - gr * (hi - lo)
        else:
            lo, c = c, d
            d = lo + gr * (hi - lo)
        if hi - lo < 1e-14:
            break
    r_s = math.exp(0.5 * (lo + hi))
    best = _tied_params(alpha, r_s, N)
    equal = optimize_ci_params(alpha, N, consts, geo, rule="equal")
    if ci_width(equal, consts, geo) < ci_width(best, consts, geo):
        best = equal
    return best


def lower_width(alpha: float, m1: float, N: int) -> float:
    """Width floor no procedure can beat: 2*gamma*q(1-alpha)*M1/sqrt(N)."""
    if not 0.0 < alpha < 1.0:
        raise ParameterRangeError(f"alpha must lie in (0,1), got {alpha}")
    return 2.0 * gamma_lower_bound() * normal_quantile(1.0 - alpha) * m1 / math.sqrt(N)


def ratio_table1(alpha: float, m1: float, m2: float, N: int, rule: str = "tied") -> float:
    """Achieved-to-floor width ratio in the unit Euclidean ball geometry."""
    from .geometry import euclidean_spec
    consts = MomentConstants(m1, m2)
    geo = euclidean_spec(1)
    params = optimize_ci_params(alpha, N, consts, geo, rule=rule)
    return ci_width(params, consts, geo) / lower_width(alpha, m1, N)


# ---------------------------------------------------------------------------
# minimax and constrained variants

def risks_minimax(mu: float, s: float, lam: float, N: int, m: int) -> tuple[float, float]:
    """Unclipped risks of the m-component minimax deviation bounds.

    ``upper_risk`` guards Opt_N > Opt + mu*M1/sqrt(N); ``lower_risk`` guards
    Opt_N < Opt - [mu*M1 + 2*M2*(Omega(1+s^2)/2 + 2*lambda)]/sqrt(N).
    """
    if m < 1:
        raise ParameterRangeError(f"component count must be >= 1, got {m}")
    if s < 1.0:
        raise ParameterRangeError(f"s must be >= 1, got {s}")
    _check_mu(mu, N, "mu")
    _check_mu(lam, N, "lambda")
    t4 = 4.0 * tau_star()
    e_mu = math.exp(-mu * mu / t4)
    upper = m * e_mu
    lower = e_mu + 2.0 * (math.exp(-N * (s * s - 1.0)) + math.exp(-lam * lam / t4))
    return upper, lower


def underestimator_feasible(epsilon: float, mu: float, s: float, lam: float, N: int,
                            consts: MomentConstants, geo: GeometrySpec,
                            m: int) -> tuple[bool, float]:
    """Check the shifted-SAA underestimation margin and return its failure risk.

    The shifted SAA epsilon-underestimates the constrained optimum with
    probability >= 1 - beta provided epsilon strictly exceeds
    2/sqrt(N) * [mu*M1 + M2*R*(Omega(1+s^2)/2 + lambda)].
    """
    if m < 1:
        raise ParameterRangeError(f"constraint count must be >= 1, got {m}")
    if s < 1.0:
        raise ParameterRangeError(f"s must be >= 1, got {s}")
    _check_mu(mu, N, "mu")
    _check_mu(lam, N, "lambda")
    threshold = 2.0 / math.sqrt(N) * (
        mu * consts.m1
        + consts.m2 * geo.radius * (geo.omega_cap / 2.0 * (1.0 + s * s) + lam))
    t4 = 4.0 * tau_star()
    beta = (math.exp(-N * (s * s - 1.0)) + math.exp(-lam * lam / t4)
            + (m + 2) * math.exp(-mu * mu / t4))
    return epsilon > threshold, beta


def theta_lower_bound(kappa: float, V: float) -> float:
    """Sharpness floor of the constrained max-function at the optimum: kappa/(V+kappa)."""
    if kappa <= 0.0:
        raise ParameterRangeError(f"strict feasibility level must be positive, got {kappa}")
    if V < 0.0:
        raise ParameterRangeError(f"objective range must be >= 0, got {V}")
    return kappa / (V + kappa)
