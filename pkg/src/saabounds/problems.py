"""Benchmark stochastic programs: samplers, exact oracles, and moment constants.

Six instance families are provided.  Four portfolio-style families (quadratic
risk, Gaussian VaR proxy, mean-CVaR, minimax-CVaR, mean-constrained CVaR) come
with exact expectation oracles and ground-truth optimal values (closed forms
where available, exact-distribution LPs for the Bernoulli families), plus the
moment-constant calculators that feed the deviation bounds.  The sixth family
is the adversarial spherical-cap construction on which SAA solutions provably
stall at a dimension-independent accuracy floor.

Randomness is counter-based (Philox): replication ``r`` of a study draws from
the stream keyed ``(seed, r)``, so parallel replication order is irrelevant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .bounds import MomentConstants, normal_cdf, normal_quantile
from .geometry import GeometrySpec, euclidean_spec, mixed_spec, simplex_l1_spec
from .solvers import SmoothOracle, solve_lp, solve_simplex_smooth
from .solvers.reformulate import cvar_portfolio_lp, minimax_cvar_lp

__all__ = [
    "InstanceKind",
    "ProblemInstance",
    "Sample",
    "CapabilityError",
    "ConstructionError",
    "philox_rng",
    "sample",
    "scenario_costs",
    "estimation_costs",
    "exact_f",
    "exact_components",
    "true_opt",
    "constants_quadratic",
    "constants_gaussian_var",
    "constants_cvar",
    "gaussian_sup_constant",
    "build_quadratic_instance",
    "build_gaussian_var_instance",
    "build_cvar_instance",
    "build_minimax_instance",
    "build_constrained_instance",
    "build_hard_case",
    "hard_case_delta",
    "instance_to_text",
    "instance_from_text",
]

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
ENUMERATION_LIMIT = 20


class CapabilityError(RuntimeError):
    """Exact computation requested beyond the tractable range."""


class ConstructionError(RuntimeError):
    """Random instance construction failed (e.g. cap packing stalled)."""


def philox_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator for stream ``stream`` of master seed ``seed``."""
    key = np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF),
                    np.uint64(stream & 0xFFFFFFFFFFFFFFFF)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


class InstanceKind(Enum):
    QUADRATIC_RISK = "quadratic_risk"
    GAUSSIAN_VAR = "gaussian_var"
    CVAR = "cvar"
    MINIMAX_CVAR = "minimax_cvar"
    CONSTRAINED_CVAR = "constrained_cvar"
    HARD_CASE = "hard_case"


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """One concrete stochastic program (distribution fixed, domain fixed).

    Only the fields relevant to ``kind`` are populated.  ``drop_zero_mean``
    controls whether the Gaussian-VaR family works with the zero-mean linear
    term removed (it changes no expectation, only variances; see
    ``estimation_costs``).
    """

    kind: InstanceKind
    n: int
    geometry: GeometrySpec
    constants: MomentConstants
    kappa0: float = 0.0
    kappa1: float = 0.0
    eps_cvar: float = 0.0
    theta: np.ndarray | None = None        # Bernoulli(+1) probabilities
    sigma_diag: np.ndarray | None = None   # Gaussian covariance diagonal
    mean: np.ndarray | None = None         # Gaussian mean (constrained family)
    chi: tuple | float | None = None       # component offsets / constraint level
    centers: np.ndarray | None = None      # hard-case cap centers
    cap_delta: float = 0.0
    drop_zero_mean: bool = False
    makeup: dict = field(default_factory=dict)  # builder echo for serialization


@dataclass(frozen=True)
class Sample:
    xi: np.ndarray
    seed: int
    stream: int
    N: int


# ---------------------------------------------------------------------------
# moment constants

def constants_quadratic(kappa0: float, kappa1: float) -> MomentConstants:
    """Value/subgradient scales 2|k0| + k1/2 and 2|k0| + 2 k1 for the quadratic family."""
    if kappa1 < 0.0:
        raise ValueError(f"kappa1 must be >= 0, got {kappa1}")
    if kappa0 == 0.0 and kappa1 == 0.0:
        raise ValueError("degenerate all-zero objective has no positive constants")
    return MomentConstants(2.0 * abs(kappa0) + 0.5 * kappa1,
                           2.0 * abs(kappa0) + 2.0 * kappa1)


def gaussian_sup_constant(sigma_bar: float, n: int) -> float:
    """Scale making the sup-norm of an n-variate Gaussian sub-Gaussian at level e."""
    if sigma_bar <= 0.0:
        raise ValueError(f"sigma_bar must be positive, got {sigma_bar}")
    return sigma_bar * math.sqrt(2.0 * (2.0 + math.log(n)))


def gaussian_sup_constant_improved(sigma_bar: float, n: int) -> float:
    """Tighter sup-norm scale 1/t_n, with t_n found by bisection.

    t_n is the root of n^(2 t^2 s^2) / (1 - 2 t^2 s^2) = e on (0, 1/(s*sqrt(2))).
    """
    if sigma_bar <= 0.0:
        raise ValueError(f"sigma_bar must be positive, got {sigma_bar}")
    s2 = sigma_bar * sigma_bar

    def h(t):
        u = 2.0 * t * t * s2
        return u * math.log(n) - math.log1p(-u) - 1.0

    lo, hi = 0.0, 1.0 / math.sqrt(2.0 * s2)
    if h(hi * (1.0 - 1e-12)) < 0.0:
        raise ArithmeticError("bisection bracket failure for the sup-norm scale")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if h(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 1.0 / (0.5 * (lo + hi))


def constants_gaussian_var(kappa0: float, kappa1: float, sigma_max: float,
                           n: int, improved: bool = False) -> MomentConstants:
    """Moment constants of the Gaussian VaR family (sigma_max a standard deviation)."""
    if kappa1 < 0.0:
        raise ValueError(f"kappa1 must be >= 0, got {kappa1}")
    nu = math.sqrt(2.0 * math.e ** 2 / (math.e ** 2 - 1.0))
    m1 = (nu * abs(kappa0) + math.sqrt(2.0) * kappa1) * sigma_max
    sup = (gaussian_sup_constant_improved(sigma_max, n) if improved
           else gaussian_sup_constant(sigma_max, n))
    m2 = (abs(kappa0) + kappa1) * sup + kappa1 * sigma_max * SQRT_2_OVER_PI
    return MomentConstants(m1, m2)


def constants_cvar(kappa0: float, kappa1: float, eps_cvar: float,
                   n: int) -> MomentConstants:
    """Moment constants of the bounded-support CVaR family (n = asset count)."""
    if not 0.0 < eps_cvar < 1.0:
        raise ValueError(f"CVaR level must lie in (0,1), got {eps_cvar}")
    lam = kappa0 + kappa1 / eps_cvar
    m1 = 2.0 * lam
    m2 = kappa1 / eps_cvar if n == 0 else math.sqrt((kappa1 / eps_cvar) ** 2 + 4.0 * lam * lam)
    return MomentConstants(m1, m2)


# ---------------------------------------------------------------------------
# builders

def build_quadratic_instance(n: int, kappa0: float = 0.1, kappa1: float = 0.9,
                             rng: np.random.Generator | None = None,
                             theta: np.ndarray | None = None) -> ProblemInstance:
    """Quadratic risk on the simplex with +-1 Bernoulli coordinates."""
    if theta is None:
        theta = (rng or philox_rng(0)).uniform(0.0, 1.0, n)
    theta = np.asarray(theta, dtype=float)
    return ProblemInstance(
        kind=InstanceKind.QUADRATIC_RISK, n=n, geometry=simplex_l1_spec(n),
        constants=constants_quadratic(kappa0, kappa1),
        kappa0=kappa0, kappa1=kappa1, theta=theta,
        makeup=dict(kappa0=kappa0, kappa1=kappa1))


def build_gaussian_var_instance(n: int, kappa0: float = 0.9, kappa1: float = 0.1,
                                rng: np.random.Generator | None = None,
                                sigma_diag: np.ndarray | None = None,
                                sigma_range: tuple = (1.0, 6.0),
                                improved_m2: bool = False,
                                drop_zero_mean: bool = True) -> ProblemInstance:
    """VaR-proxy portfolio with centered Gaussian returns, diagonal covariance.

    The linear kappa0 term has zero mean; by default the family works with it
    removed, which leaves every expectation unchanged.
    """
    if sigma_diag is None:
        sigma_diag = (rng or philox_rng(0)).uniform(*sigma_range, n)
    sigma_diag = np.asarray(sigma_diag, dtype=float)
    sigma_max = math.sqrt(sigma_range[1])
    return ProblemInstance(
        kind=InstanceKind.GAUSSIAN_VAR, n=n, geometry=simplex_l1_spec(n),
        constants=constants_gaussian_var(kappa0, kappa1, sigma_max, n, improved_m2),
        kappa0=kappa0, kappa1=kappa1, sigma_diag=sigma_diag,
        drop_zero_mean=drop_zero_mean,
        makeup=dict(kappa0=kappa0, kappa1=kappa1, sigma_max=sigma_max,
                    improved_m2=improved_m2))


def build_cvar_instance(n: int, kappa0: float, kappa1: float, eps_cvar: float,
                        rng: np.random.Generator | None = None,
                        theta: np.ndarray | None = None) -> ProblemInstance:
    """Mean-CVaR portfolio on [-1,1] x simplex with +-1 Bernoulli coordinates.

    ``n = 0`` is the single-asset convention: the allocation is the constant 1
    and only the threshold variable remains.
    """
    assets = max(n, 1)
    if theta is None:
        theta = (rng or philox_rng(0)).uniform(0.0, 1.0, assets)
    theta = np.asarray(theta, dtype=float)
    return ProblemInstance(
        kind=InstanceKind.CVAR, n=n, geometry=mixed_spec(n),
        constants=constants_cvar(kappa0, kappa1, eps_cvar, n),
        kappa0=kappa0, kappa1=kappa1, eps_cvar=eps_cvar, theta=theta,
        makeup=dict(kappa0=kappa0, kappa1=kappa1, eps_cvar=eps_cvar))


def _bernoulli_patterns(n: int) -> np.ndarray:
    if n > ENUMERATION_LIMIT:
        raise CapabilityError(
            f"exact Bernoulli enumeration limited to n <= {ENUMERATION_LIMIT} "
            f"(2^{n} outcomes); use Monte Carlo estimation instead")
    codes = np.arange(2 ** n, dtype=np.int64)
    bits = (codes[:, None] >> np.arange(n)) & 1
    return bits.astype(float) * 2.0 - 1.0


def _pattern_probs(theta: np.ndarray) -> np.ndarray:
    pats = _bernoulli_patterns(theta.size)
    probs = np.ones(pats.shape[0])
    for i, th in enumerate(theta):
        probs *= np.where(pats[:, i] > 0.0, th, 1.0 - th)
    return probs


def build_minimax_instance(n: int, eps_cvar: float, seed: int = 0,
                           rng: np.random.Generator | None = None) -> ProblemInstance:
    """Three-component minimax risk toy tuned so all components tie at the optimum.

    With zero offsets the exact-distribution minimax is solved once; negating
    the component values at its minimizer and using them as offsets makes all
    three components equal (to zero) there, and the mean/minus-mean pair pins
    that point as a global minimizer: the true optimal value is exactly 0.
    """
    rng = rng or philox_rng(seed)
    theta = rng.uniform(0.0, 1.0, n)
    pats = _bernoulli_patterns(n)
    probs = _pattern_probs(theta)
    lp0 = minimax_cvar_lp(pats, eps_cvar, (0.0, 0.0, 0.0), weights=probs)
    res0 = solve_lp(lp0, tol=1e-10)
    u_star, v_star = res0.x[:n], res0.x[n]
    z = pats @ u_star
    mean_ret = float(probs @ z)
    f1 = v_star + float(probs @ np.maximum(z - v_star, 0.0)) / eps_cvar
    chi = (-f1, -mean_ret, mean_ret)
    return ProblemInstance(
        kind=InstanceKind.MINIMAX_CVAR, n=n, geometry=mixed_spec(n),
        constants=constants_cvar(1.0, 1.0, eps_cvar, n),
        kappa0=0.0, kappa1=1.0, eps_cvar=eps_cvar, theta=theta, chi=chi,
        makeup=dict(eps_cvar=eps_cvar, seed=seed, true_opt=0.0))


def build_constrained_instance(chi: float = 0.3, eps_cvar: float = 0.1,
                               mean=(0.1, 0.5), sigma_diag=(1.0, 4.0),
                               N: int = 128) -> ProblemInstance:
    """The fixed two-asset CVaR toy with a stiff mean-return constraint.

    ``makeup`` carries the two analytic quantities the stability study checks:
    the probability that the sample mean of the better asset falls below the
    constraint level, and the quantile relaxation that restores feasibility.
    """
    mean = np.asarray(mean, dtype=float)
    sig = np.asarray(sigma_diag, dtype=float)
    n = mean.size
    sigma_max_var = float(np.max(sig))  # a variance, per the relaxation recipe
    best = int(np.argmax(mean))
    infeas = normal_cdf((chi - mean[best]) * math.sqrt(N) / math.sqrt(sig[best]))
    delta = normal_quantile(1.0 - eps_cvar / n) * sigma_max_var / math.sqrt(N)
    consts = MomentConstants(1.0, 1.0)  # unused by the stability study
    return ProblemInstance(
        kind=InstanceKind.CONSTRAINED_CVAR, n=n, geometry=mixed_spec(n),
        constants=consts, kappa0=0.0, kappa1=1.0, eps_cvar=eps_cvar,
        mean=mean, sigma_diag=sig, chi=chi,
        makeup=dict(N=N, chi=chi, eps_cvar=eps_cvar,
                    infeasibility_probability=infeas, relaxation_delta=delta,
                    sigma_max_variance=sigma_max_var))


THETA_CAP = 0.125
MAX_CENTERS = 4096


def hard_case_delta(theta_cap: float = THETA_CAP) -> float:
    """Cap elevation 2*sin^2(theta/2): the unavoidable SAA solution gap."""
    return 2.0 * math.sin(theta_cap / 2.0) ** 2


def build_hard_case(n: int, N: int, seed: int = 0,
                    rng: np.random.Generator | None = None) -> ProblemInstance:
    """Spherical-cap sum on the Euclidean ball that defeats SAA solutions.

    Cap centers are greedily packed on the unit sphere with pairwise angle
    > 2*theta (random candidates, accept when far from all accepted), up to
    min(2^n, 4096) centers.  Scenario masks are fair coins per center.
    """
    if n < 3:
        raise ValueError(f"the construction needs n >= 3, got {n}")
    rng = rng or philox_rng(seed)
    target = min(2 ** n, MAX_CENTERS)
    cos_gap = math.cos(2.0 * THETA_CAP)
    centers = np.empty((target, n))
    count, stall = 0, 0
    while count < target and stall < 200_000:
        v = rng.normal(size=n)
        v /= np.linalg.norm(v)
        if count == 0 or float(np.max(centers[:count] @ v)) < cos_gap:
            centers[count] = v
            count += 1
            stall = 0
        else:
            stall += 1
    if count < 2:
        raise ConstructionError(
            f"cap packing stalled at {count} centers for n={n}")
    centers = centers[:count]
    delta = hard_case_delta()
    geo = euclidean_spec(n)
    return ProblemInstance(
        kind=InstanceKind.HARD_CASE, n=n, geometry=geo,
        constants=MomentConstants(max(delta, 1e-12) * 2.0, 1.0),
        centers=centers, cap_delta=delta,
        makeup=dict(N=N, seed=seed, n_centers=count))


# ---------------------------------------------------------------------------
# sampling

def sample(instance: ProblemInstance, N: int, seed: int = 0, stream: int = 0,
           rng: np.random.Generator | None = None) -> Sample:
    """Draw N i.i.d. scenario rows for the instance, reproducibly."""
    if N < 1:
        raise ValueError(f"sample size must be >= 1, got {N}")
    rng = rng or philox_rng(seed, stream)
    kind = instance.kind
    if kind in (InstanceKind.QUADRATIC_RISK, InstanceKind.CVAR,
                InstanceKind.MINIMAX_CVAR):
        u = rng.uniform(0.0, 1.0, (N, instance.theta.size))
        xi = np.where(u < instance.theta, 1.0, -1.0)
    elif kind is InstanceKind.GAUSSIAN_VAR:
        xi = rng.normal(0.0, 1.0, (N, instance.n)) * np.sqrt(instance.sigma_diag)
    elif kind is InstanceKind.CONSTRAINED_CVAR:
        xi = instance.mean + rng.normal(0.0, 1.0, (N, instance.n)) * np.sqrt(instance.sigma_diag)
    elif kind is InstanceKind.HARD_CASE:
        xi = rng.integers(0, 2, (N, instance.centers.shape[0])).astype(float)
    else:
        raise TypeError(f"unknown instance kind {kind!r}")
    return Sample(xi=xi, seed=seed, stream=stream, N=N)


# ---------------------------------------------------------------------------
# scenario costs and exact expectations

def scenario_costs(instance: ProblemInstance, x: np.ndarray,
                   xi: np.ndarray) -> np.ndarray:
    """Per-scenario cost of decision ``x`` (the full integrand)."""
    x = np.asarray(x, dtype=float)
    kind = instance.kind
    if kind is InstanceKind.QUADRATIC_RISK:
        z = xi @ x
        return instance.kappa0 * z + 0.5 * instance.kappa1 * z * z
    if kind is InstanceKind.GAUSSIAN_VAR:
        z = xi @ x
        return instance.kappa0 * z + instance.kappa1 * np.abs(z)
    if kind is InstanceKind.CVAR:
        if instance.geometry.degenerate_simplex:
            x0, z = x[0], xi[:, 0]
        else:
            x0, z = x[-1], xi @ x[:-1]
        excess = np.maximum(z - x0, 0.0)
        return (instance.kappa0 * z
                + instance.kappa1 * (x0 + excess / instance.eps_cvar))
    if kind is InstanceKind.HARD_CASE:
        margins = np.maximum(instance.centers @ x - (1.0 - instance.cap_delta), 0.0)
        return 2.0 * xi @ margins
    raise TypeError(f"scenario_costs undefined for kind {kind!r}; "
                    "use component_costs for multi-function instances")


def component_costs(instance: ProblemInstance, x: np.ndarray, xi: np.ndarray,
                    component: int) -> np.ndarray:
    """Per-scenario cost of one component of a multi-function instance.

    Minimax layout: x = [allocation; threshold].  Constrained layout likewise;
    component 0 is the CVaR objective, component 1 the constraint integrand.
    """
    x = np.asarray(x, dtype=float)
    u, v = x[:-1], x[-1]
    z = xi @ u
    if instance.kind is InstanceKind.MINIMAX_CVAR:
        chi = instance.chi
        if component == 0:
            return v + np.maximum(z - v, 0.0) / instance.eps_cvar + chi[0]
        if component == 1:
            return z + chi[1]
        if component == 2:
            return chi[2] - z
    if instance.kind is InstanceKind.CONSTRAINED_CVAR:
        if component == 0:
            return v + np.maximum(z - v, 0.0) / instance.eps_cvar
        if component == 1:
            return instance.chi - z
    raise TypeError(f"no component {component} for kind {instance.kind!r}")


def estimation_costs(instance: ProblemInstance, x: np.ndarray,
                     xi: np.ndarray) -> np.ndarray:
    """Scenario costs as used for mean/variance estimation.

    Identical to ``scenario_costs`` except for the Gaussian-VaR family with
    ``drop_zero_mean`` set, where the zero-mean linear term is removed: the
    estimator mean is unchanged and its variance is much reduced.
    """
    if instance.kind is InstanceKind.GAUSSIAN_VAR and instance.drop_zero_mean:
        z = xi @ np.asarray(x, dtype=float)
        return instance.kappa1 * np.abs(z)
    return scenario_costs(instance, x, xi)


def _quadratic_v(instance: ProblemInstance) -> tuple[np.ndarray, np.ndarray]:
    mu = 2.0 * instance.theta - 1.0
    V = np.outer(mu, mu)
    np.fill_diagonal(V, 1.0)
    return mu, V


def _gaussian_partial_mean(m: float, s: float, v: float) -> float:
    # E[(Z - v)_+] for Z ~ N(m, s^2)
    if s <= 0.0:
        return max(m - v, 0.0)
    t = (m - v) / s
    return (m - v) * normal_cdf(t) + s * math.exp(-0.5 * t * t) / math.sqrt(2.0 * math.pi)


def exact_f(instance: ProblemInstance, x: np.ndarray) -> float:
    """Exact (non-Monte-Carlo) expected cost of decision ``x``."""
    x = np.asarray(x, dtype=float)
    kind = instance.kind
    if kind is InstanceKind.QUADRATIC_RISK:
        mu, V = _quadratic_v(instance)
        return float(instance.kappa0 * mu.dot(x) + 0.5 * instance.kappa1 * x.dot(V).dot(x))
    if kind is InstanceKind.GAUSSIAN_VAR:
        sig = math.sqrt(float(np.sum(instance.sigma_diag * x * x)))
        return instance.kappa1 * SQRT_2_OVER_PI * sig
    if kind is InstanceKind.CVAR:
        pats = _bernoulli_patterns(instance.theta.size)
        probs = _pattern_probs(instance.theta)
        return float(probs @ scenario_costs(instance, x, pats))
    if kind is InstanceKind.MINIMAX_CVAR:
        return float(np.max(exact_components(instance, x)))
    if kind is InstanceKind.CONSTRAINED_CVAR:
        return exact_components(instance, x)[0]
    if kind is InstanceKind.HARD_CASE:
        margins = np.maximum(instance.centers @ x - (1.0 - instance.cap_delta), 0.0)
        return float(np.sum(margins))
    raise TypeError(f"unknown instance kind {kind!r}")


def exact_components(instance: ProblemInstance, x: np.ndarray) -> np.ndarray:
    """Exact expectations of every component function at ``x``."""
    x = np.asarray(x, dtype=float)
    u, v = x[:-1], x[-1]
    if instance.kind is InstanceKind.MINIMAX_CVAR:
        pats = _bernoulli_patterns(instance.theta.size)
        probs = _pattern_probs(instance.theta)
        z = pats @ u
        mean_ret = float(probs @ z)
        chi = instance.chi
        f1 = v + float(probs @ np.maximum(z - v, 0.0)) / instance.eps_cvar + chi[0]
        return np.array([f1, mean_ret + chi[1], chi[2] - mean_ret])
    if instance.kind is InstanceKind.CONSTRAINED_CVAR:
        m = float(instance.mean.dot(u))
        s = math.sqrt(float(np.sum(instance.sigma_diag * u * u)))
        f0 = v + _gaussian_partial_mean(m, s, v) / instance.eps_cvar
        return np.array([f0, instance.chi - m])
    raise TypeError(f"exact_components undefined for kind {instance.kind!r}")


def _gaussian_cvar(m: float, s: float, eps: float) -> float:
    # min_v v + E[(Z-v)_+]/eps  for Z ~ N(m, s^2)
    q = normal_quantile(1.0 - eps)
    return m + s * math.exp(-0.5 * q * q) / (math.sqrt(2.0 * math.pi) * eps)


def true_opt(instance: ProblemInstance, tol: float = 1e-9) -> float:
    """Ground-truth optimal value of the instance's expectation problem."""
    kind = instance.kind
    if kind is InstanceKind.QUADRATIC_RISK:
        mu, V = _quadratic_v(instance)
        c = instance.kappa0 * mu
        Q = instance.kappa1 * V
        oracle = SmoothOracle(lambda x: float(c.dot(x) + 0.5 * x.dot(Q).dot(x)),
                              lambda x: c + Q.dot(x))
        return solve_simplex_smooth(oracle, instance.geometry, tol=tol).value
    if kind is InstanceKind.GAUSSIAN_VAR:
        # min x'Sigma x on the simplex: weights inverse to the variances
        inv = 1.0 / instance.sigma_diag
        return instance.kappa1 * SQRT_2_OVER_PI / math.sqrt(float(np.sum(inv)))
    if kind is InstanceKind.CVAR:
        pats = _bernoulli_patterns(instance.theta.size)
        probs = _pattern_probs(instance.theta)
        lp = cvar_portfolio_lp(pats, instance.kappa0, instance.kappa1,
                               instance.eps_cvar, weights=probs,
                               degenerate=instance.geometry.degenerate_simplex)
        return solve_lp(lp, tol=tol).value
    if kind is InstanceKind.MINIMAX_CVAR:
        pats = _bernoulli_patterns(instance.theta.size)
        probs = _pattern_probs(instance.theta)
        lp = minimax_cvar_lp(pats, instance.eps_cvar, instance.chi, weights=probs)
        return solve_lp(lp, tol=tol).value
    if kind is InstanceKind.CONSTRAINED_CVAR:
        return _constrained_true_opt(instance, tol)
    if kind is InstanceKind.HARD_CASE:
        # costs are >= 0 and vanish at the origin (outside every cap)
        assert exact_f(instance, np.zeros(instance.n)) == 0.0
        return 0.0
    raise TypeError(f"unknown instance kind {kind!r}")


def _constrained_true_opt(instance: ProblemInstance, tol: float) -> float:
    if instance.n != 2:
        raise CapabilityError("closed-form constrained optimum implemented for n = 2")
    mean, sig, chi, eps = (instance.mean, instance.sigma_diag,
                           instance.chi, instance.eps_cvar)

    def value(t):
        u = np.array([t, 1.0 - t])
        m = float(mean.dot(u))
        s = math.sqrt(float(np.sum(sig * u * u)))
        return _gaussian_cvar(m, s, eps)

    # feasibility mean'u >= chi restricts t to an interval
    lo_t, hi_t = 0.0, 1.0
    a, b = mean[0] - mean[1], mean[1]
    if abs(a) < 1e-15:
        if b < chi:
            raise CapabilityError("constrained instance infeasible")
    elif a > 0:
        lo_t = max(lo_t, (chi - b) / a)
    else:
        hi_t = min(hi_t, (chi - b) / a)
    if lo_t > hi_t:
        raise CapabilityError("constrained instance infeasible")
    gr = (math.sqrt(5.0) - 1.0) / 2.0
    a_, b_ = lo_t, hi_t
    c_, d_ = b_ - gr * (b_ - a_), a_ + gr * (b_ - a_)
    for _ in range(300):
        if value(c_) < value(d_):
            b_, d_ = d_, c_
            c_ = b_ - gr * (b_ - a_)
        else:
            a_, c_ = c_, d_
            d_ = a_ + gr * (b_ - a_)
        if b_ - a_ < 1e-14:
            break
    return value(0.5 * (a_ + b_))


# ---------------------------------------------------------------------------
# serialization (flat key=value, repr-exact floats)

def _fmt(v) -> str:
    if isinstance(v, np.ndarray):
        return ",".join(repr(float(t)) for t in v.ravel())
    if isinstance(v, tuple):
        return ",".join(repr(float(t)) for t in v)
    return repr(v)


def instance_to_text(instance: ProblemInstance) -> str:
    lines = [f"kind={instance.kind.value}", f"n={instance.n}"]
    for name in ("kappa0", "kappa1", "eps_cvar", "cap_delta"):
        lines.append(f"{name}={_fmt(getattr(instance, name))}")
    lines.append(f"drop_zero_mean={instance.drop_zero_mean}")
    for name in ("theta", "sigma_diag", "mean", "chi", "centers"):
        v = getattr(instance, name)
        if v is not None:
            if isinstance(v, np.ndarray) and v.ndim == 2:
                lines.append(f"{name}_shape={v.shape[0]}x{v.shape[1]}")
            lines.append(f"{name}={_fmt(v)}")
    for k, v in sorted(instance.makeup.items()):
        lines.append(f"makeup.{k}={_fmt(v) if isinstance(v, (np.ndarray, tuple)) else repr(v)}")
    return "\n".join(lines) + "\n"


def instance_from_text(text: str) -> ProblemInstance:
    kv = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, val = line.partition("=")
        kv[key.strip()] = val.strip()
    kind = InstanceKind(kv["kind"])
    n = int(kv["n"])

    def arr(key):
        if key not in kv:
            return None
        vals = np.array([float(t) for t in kv[key].split(",")])
        shape = kv.get(f"{key}_shape")
        if shape:
            r, c = (int(t) for t in shape.split("x"))
            vals = vals.reshape(r, c)
        return vals

    k0 = float(kv["kappa0"])
    k1 = float(kv["kappa1"])
    eps = float(kv["eps_cvar"])
    if kind is InstanceKind.QUADRATIC_RISK:
        return build_quadratic_instance(n, k0, k1, theta=arr("theta"))
    if kind is InstanceKind.GAUSSIAN_VAR:
        mk_imp = kv.get("makeup.improved_m2", "False") == "True"
        smax = float(kv.get("makeup.sigma_max", repr(math.sqrt(6.0))))
        inst = build_gaussian_var_instance(
            n, k0, k1, sigma_diag=arr("sigma_diag"),
            sigma_range=(1.0, smax * smax), improved_m2=mk_imp,
            drop_zero_mean=kv.get("drop_zero_mean", "True") == "True")
        return inst
    if kind is InstanceKind.CVAR:
        return build_cvar_instance(n, k0, k1, eps, theta=arr("theta"))
    if kind is InstanceKind.MINIMAX_CVAR:
        chi = tuple(float(t) for t in kv["chi"].split(","))
        base = build_cvar_instance(n, 0.0, 1.0, eps, theta=arr("theta"))
        return replace(base, kind=InstanceKind.MINIMAX_CVAR, chi=chi,
                       makeup=dict(eps_cvar=eps, true_opt=0.0))
    if kind is InstanceKind.CONSTRAINED_CVAR:
        return build_constrained_instance(
            chi=float(kv["chi"]), eps_cvar=eps, mean=arr("mean"),
            sigma_diag=arr("sigma_diag"), N=int(kv.get("makeup.N", "128")))
    if kind is InstanceKind.HARD_CASE:
        inst = build_hard_case(n, int(kv.get("makeup.N", "1")),
                               seed=int(kv.get("makeup.seed", "0")))
        return replace(inst, centers=arr("centers"),
                       makeup=dict(inst.makeup, n_centers=arr("centers").shape[0]))
    raise TypeError(f"unknown kind in text: {kind!r}")
