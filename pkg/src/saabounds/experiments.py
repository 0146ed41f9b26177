"""Monte Carlo studies: coverage, width ratios, minimax/constrained stress, curves.

Replication ``r`` of a study draws everything it needs (instance redraw,
scenario samples, second samples) from the Philox stream ``(seed, r)``, so
results are bit-identical no matter how replications are scheduled.  Reports
aggregate per-replication records in replication order with numpy reductions
(pairwise summation), which keeps the serial and parallel paths equal.

CSV layout (one row per statistic):
    experiment, instance_kind, n, N, alpha, reps, statistic, value, se, excluded, seed
Curve data uses: N, method, mean_gap, se.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from . import problems
from .bounds import ci_asymptotic, ci_saa_experimental, normal_quantile, risks_minimax, tau_star
from .problems import (InstanceKind, ProblemInstance, estimation_costs, exact_f,
                       philox_rng, sample, true_opt)
from .smd import run_smd
from .solvers import (IterationLimitError, LpError, LpInfeasibleError,
                      SmoothOracle, saa_lp_reformulate, solve_lp,
                      solve_simplex_smooth)

__all__ = [
    "ExperimentConfig",
    "ReportRow",
    "ExperimentReport",
    "run_coverage",
    "run_width_ratios",
    "run_minimax_lower_bound",
    "run_constrained_stability",
    "run_hard_case",
    "run_inaccuracy_curves",
    "report_to_csv",
    "loglog_slope",
]

_FIXED_INSTANCE_STREAM = 0xFFFFFFFF


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully-resolved study description; echoed verbatim into every report."""

    experiment: str
    instance_kind: str = "quadratic"
    n: int = 2
    N: int = 100
    reps: int = 200
    alpha: float = 0.1
    seed: int = 0
    kappa0: float | None = None
    kappa1: float | None = None
    eps_cvar: float = 0.1
    fixed_instance: bool = False
    improved_m2: bool = False
    exclude_noncovering: bool = True     # the ratio-averaging exclusion rule
    minimax_total_risk: float = 0.1
    solve_tol: float = 1e-8
    workers: int = 1
    curve_n_min: int = 32
    curve_n_max: int = 4096

    def kappas(self) -> tuple[float, float]:
        defaults = {"quadratic": (0.1, 0.9), "gaussian_var": (0.9, 0.1),
                    "cvar": (0.1, 0.9)}
        d0, d1 = defaults.get(self.instance_kind, (0.1, 0.9))
        return (d0 if self.kappa0 is None else self.kappa0,
                d1 if self.kappa1 is None else self.kappa1)


@dataclass(frozen=True)
class ReportRow:
    statistic: str
    value: float
    se: float = 0.0
    excluded: int = 0


@dataclass(frozen=True)
class ExperimentReport:
    config: ExperimentConfig
    rows: tuple
    curves: tuple = ()
    runtime_s: float = 0.0

    def value(self, statistic: str) -> float:
        for row in self.rows:
            if row.statistic == statistic:
                return row.value
        raise KeyError(statistic)


def _binom_se(freq: float, n: int) -> float:
    return math.sqrt(max(freq * (1.0 - freq), 0.0) / n) if n > 0 else 0.0


def _mean_se(values: np.ndarray) -> tuple[float, float]:
    if values.size == 0:
        return math.nan, math.nan
    m = float(np.mean(values))
    if values.size == 1:
        return m, 0.0
    return m, float(np.std(values, ddof=1) / math.sqrt(values.size))


# ---------------------------------------------------------------------------
# instance drawing and SAA solving

def _draw_instance(config: ExperimentConfig, rng) -> ProblemInstance:
    k0, k1 = config.kappas()
    kind = config.instance_kind
    if kind == "quadratic":
        return problems.build_quadratic_instance(config.n, k0, k1, rng=rng)
    if kind == "gaussian_var":
        return problems.build_gaussian_var_instance(
            config.n, k0, k1, rng=rng, improved_m2=config.improved_m2)
    if kind == "cvar":
        return problems.build_cvar_instance(config.n, k0, k1, config.eps_cvar, rng=rng)
    raise ValueError(f"unknown instance kind {kind!r}")


def _instance_for_rep(config: ExperimentConfig, r: int, rng):
    if config.fixed_instance:
        return _draw_instance(config, philox_rng(config.seed, _FIXED_INSTANCE_STREAM))
    return _draw_instance(config, rng)


def _solve_saa(instance: ProblemInstance, xi: np.ndarray, tol: float):
    """Return (x_hat, opt_n) for the sample average problem."""
    if instance.kind is InstanceKind.QUADRATIC_RISK:
        m = xi.mean(axis=0)
        G = (xi.T @ xi) / xi.shape[0]
        c = instance.kappa0 * m
        Q = instance.kappa1 * G
        oracle = SmoothOracle(lambda x: float(c.dot(x) + 0.5 * x.dot(Q).dot(x)),
                              lambda x: c + Q.dot(x))
        res = solve_simplex_smooth(oracle, instance.geometry, tol=max(tol, 1e-10))
        return res.x, res.value
    lp = saa_lp_reformulate(instance, xi)
    res = solve_lp(lp, tol=tol)
    if instance.kind is InstanceKind.GAUSSIAN_VAR:
        n_dec = instance.n
    elif instance.geometry.degenerate_simplex:
        n_dec = 1                      # only the threshold variable
    else:
        n_dec = instance.n + 1         # allocation block plus threshold
    return res.x[:n_dec], res.value


# ---------------------------------------------------------------------------
# coverage / width replications (shared work)

def _rep_coverage(config: ExperimentConfig, r: int):
    rng = philox_rng(config.seed, r)
    instance = _instance_for_rep(config, r, rng)
    opt = true_opt(instance, tol=min(config.solve_tol, 1e-9))
    xi = sample(instance, config.N, rng=rng).xi
    try:
        x_hat, opt_n = _solve_saa(instance, xi, config.solve_tol)
    except (LpError, IterationLimitError):
        return (0.0, 0.0, 0.0, math.nan, math.nan, 1.0)
    xi2 = sample(instance, config.N, rng=rng).xi
    costs = estimation_costs(instance, x_hat, xi2)
    ci_a = ci_asymptotic(costs, config.alpha)
    ci_s = ci_saa_experimental(opt_n, float(np.mean(costs)), config.alpha,
                               config.N, instance.constants, instance.geometry)
    return (float(ci_a.contains(opt)), float(ci_s.contains(opt)),
            float(ci_a.degenerate), ci_a.width, ci_s.width, 0.0)


def _collect(config: ExperimentConfig, rep_fn, n_out: int) -> np.ndarray:
    """Per-replication records in replication order.

    An interrupt stops collection and returns the completed prefix, so a
    partially-run study still aggregates into a flushable report.
    """
    reps = config.reps
    if config.workers > 1:
        chunks = np.array_split(np.arange(reps), config.workers * 4)
        out = np.empty((reps, n_out))
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            futures = [pool.submit(_run_chunk, config, rep_fn.__name__, chunk.tolist())
                       for chunk in chunks if chunk.size]
            for fut in futures:
                for r, row in fut.result():
                    out[r] = row
        return out
    done = []
    try:
        for r in range(reps):
            done.append(rep_fn(config, r))
    except KeyboardInterrupt:
        if not done:
            raise
    return np.array(done)


def _run_chunk(config: ExperimentConfig, fn_name: str, rep_ids):
    fn = globals()[fn_name]
    return [(r, fn(config, r)) for r in rep_ids]


def run_coverage(config: ExperimentConfig) -> ExperimentReport:
    """Empirical coverage of the two intervals against the true optimal value."""
    t0 = time.perf_counter()
    data = _collect(config, _rep_coverage, 6)
    failed = int(np.sum(data[:, 5]))
    ok = data[data[:, 5] == 0.0]
    n_ok = ok.shape[0]
    cov_a = float(np.mean(ok[:, 0])) if n_ok else math.nan
    cov_s = float(np.mean(ok[:, 1])) if n_ok else math.nan
    rows = (
        ReportRow("coverage_asymptotic", cov_a, _binom_se(cov_a, n_ok), failed),
        ReportRow("coverage_saa", cov_s, _binom_se(cov_s, n_ok), failed),
        ReportRow("degenerate_intervals", float(np.sum(ok[:, 2])), 0.0, failed),
        ReportRow("replications_failed", float(failed), 0.0, 0),
        ReportRow("replications_completed", float(data.shape[0]), 0.0, 0),
    )
    return ExperimentReport(config, rows, runtime_s=time.perf_counter() - t0)


def run_width_ratios(config: ExperimentConfig) -> ExperimentReport:
    """Mean width ratio |C_SAA| / |C_a| over the retained replications.

    A replication is retained when its asymptotic interval covers the true
    value (the degenerate-variance realizations drop out with the rest);
    with ``exclude_noncovering`` off, only degenerate intervals are dropped.
    """
    t0 = time.perf_counter()
    data = _collect(config, _rep_coverage, 6)
    failed = int(np.sum(data[:, 5]))
    ok = data[data[:, 5] == 0.0]
    if config.exclude_noncovering:
        keep = ok[(ok[:, 0] > 0.0) & (ok[:, 3] > 0.0)]
    else:
        keep = ok[ok[:, 3] > 0.0]
    excluded = ok.shape[0] - keep.shape[0]
    if keep.shape[0] == 0:
        raise RuntimeError("every replication was excluded; no ratios to average")
    ratios = keep[:, 4] / keep[:, 3]
    mean, se = _mean_se(ratios)
    rows = (
        ReportRow("width_ratio_mean", mean, se, excluded),
        ReportRow("width_asymptotic_mean", *_mean_se(keep[:, 3]), excluded),
        ReportRow("width_saa_mean", *_mean_se(keep[:, 4]), excluded),
        ReportRow("replications_failed", float(failed), 0.0, 0),
        ReportRow("replications_retained", float(keep.shape[0]), 0.0, excluded),
        ReportRow("replications_completed", float(data.shape[0]), 0.0, 0),
    )
    return ExperimentReport(config, rows, runtime_s=time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# minimax lower bounds

def _rep_minimax(config: ExperimentConfig, r: int):
    rng = philox_rng(config.seed, r)
    instance = problems.build_minimax_instance(config.n, config.eps_cvar, rng=rng)
    opt = instance.makeup["true_opt"]
    xi = sample(instance, config.N, rng=rng).xi
    lp = saa_lp_reformulate(instance, xi)
    res = solve_lp(lp, tol=config.solve_tol)
    x_hat = res.x[:instance.n + 1]
    opt_n = res.value
    xi2 = sample(instance, config.N, rng=rng).xi
    m = 3
    q3 = normal_quantile(1.0 - config.alpha / m)
    asym_low = -math.inf
    for comp in range(m):
        vals = problems.component_costs(instance, x_hat, xi2, comp)
        fh = float(np.mean(vals))
        sig = math.sqrt(max(float(np.mean(vals * vals)) - fh * fh, 0.0))
        asym_low = max(asym_low, fh - q3 * sig / math.sqrt(config.N))
    # deviation-bound lower limit: half the risk budget on the upper tail
    mu = math.sqrt(4.0 * tau_star() * math.log(m / (config.minimax_total_risk / 2.0)))
    dev_low = opt_n - mu * instance.constants.m1 / math.sqrt(config.N)
    # the rest, equally split, on the three lower-tail terms (upper limit)
    r3 = config.minimax_total_risk / 6.0
    mu2 = lam = math.sqrt(4.0 * tau_star() * math.log(1.0 / r3))
    s = math.sqrt(1.0 + math.log(1.0 / r3) / config.N)
    geo = instance.geometry
    dev_up = opt_n + (mu2 * instance.constants.m1
                      + 2.0 * instance.constants.m2 * (
                          geo.omega_cap * (1.0 + s * s) / 2.0 + 2.0 * lam)
                      ) / math.sqrt(config.N)
    up_risk, low_risk = risks_minimax(mu, s, lam, config.N, m)
    return (float(asym_low > opt), float(dev_low > opt), float(dev_up < opt),
            asym_low, dev_low, up_risk)


def run_minimax_lower_bound(config: ExperimentConfig) -> ExperimentReport:
    """Failure counts of the CLT lower bound versus the deviation-bound one."""
    t0 = time.perf_counter()
    data = _collect(config, _rep_minimax, 6)
    n = data.shape[0]
    f_asym = float(np.mean(data[:, 0]))
    f_dev = float(np.mean(data[:, 1]))
    f_dev_up = float(np.mean(data[:, 2]))
    rows = (
        ReportRow("asymptotic_failures", f_asym, _binom_se(f_asym, n)),
        ReportRow("deviation_bound_failures", f_dev, _binom_se(f_dev, n)),
        ReportRow("deviation_upper_failures", f_dev_up, _binom_se(f_dev_up, n)),
        ReportRow("asymptotic_lower_mean", *_mean_se(data[:, 3])),
        ReportRow("deviation_lower_mean", *_mean_se(data[:, 4])),
        ReportRow("configured_upper_risk", float(np.mean(data[:, 5])), 0.0),
    )
    return ExperimentReport(config, rows, runtime_s=time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# constrained stability

def _rep_constrained(config: ExperimentConfig, r: int):
    rng = philox_rng(config.seed, r)
    instance = problems.build_constrained_instance(eps_cvar=config.eps_cvar,
                                                   N=config.N)
    xi = sample(instance, config.N, rng=rng).xi
    delta = instance.makeup["relaxation_delta"]
    out = []
    for chi in (instance.chi, instance.chi - delta):
        try:
            lp = saa_lp_reformulate(instance, xi, chi=chi)
            res = solve_lp(lp, tol=config.solve_tol)
            u = res.x[:instance.n]
            out.extend([0.0, res.value, float(instance.mean.dot(u))])
        except LpInfeasibleError:
            out.extend([1.0, math.nan, math.nan])
    return tuple(out)


def run_constrained_stability(config: ExperimentConfig) -> ExperimentReport:
    """Infeasibility rates of the stiff sample problem, as-is and relaxed."""
    t0 = time.perf_counter()
    instance = problems.build_constrained_instance(eps_cvar=config.eps_cvar,
                                                   N=config.N)
    data = _collect(config, _rep_constrained, 6)
    n = data.shape[0]
    inf_asis = float(np.mean(data[:, 0]))
    inf_relaxed = float(np.mean(data[:, 3]))
    feas = data[data[:, 0] == 0.0]
    feas_rel = data[data[:, 3] == 0.0]
    rows = (
        ReportRow("infeasible_asis", inf_asis, _binom_se(inf_asis, n)),
        ReportRow("infeasible_relaxed", inf_relaxed, _binom_se(inf_relaxed, n)),
        ReportRow("analytic_infeasibility",
                  instance.makeup["infeasibility_probability"], 0.0),
        ReportRow("relaxation_delta", instance.makeup["relaxation_delta"], 0.0),
        ReportRow("true_opt", true_opt(instance), 0.0),
        ReportRow("opt_n_asis_mean", *_mean_se(feas[:, 1]),
                  int(np.sum(data[:, 0]))),
        ReportRow("opt_n_relaxed_mean", *_mean_se(feas_rel[:, 4]),
                  int(np.sum(data[:, 3]))),
        ReportRow("mean_return_asis_mean", *_mean_se(feas[:, 2]),
                  int(np.sum(data[:, 0]))),
        ReportRow("mean_return_relaxed_mean", *_mean_se(feas_rel[:, 5]),
                  int(np.sum(data[:, 3]))),
    )
    return ExperimentReport(config, rows, runtime_s=time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# hard case

def _rep_hardcase(config: ExperimentConfig, r: int, instance: ProblemInstance):
    rng = philox_rng(config.seed, r)
    masks = sample(instance, config.N, rng=rng).xi
    hits = masks.sum(axis=0)
    dead = np.flatnonzero(hits == 0.0)
    if dead.size == 0:
        return (0.0, math.nan, math.nan)
    v_bar = instance.centers[dead[0]]
    saa_at_vbar = float(np.mean(problems.scenario_costs(instance, v_bar, masks)))
    gap = exact_f(instance, v_bar) - true_opt(instance)
    return (1.0, saa_at_vbar, gap)


def run_hard_case(config: ExperimentConfig) -> ExperimentReport:
    """Frequency of the dead-cap event and the exact solution gap it forces."""
    if config.N > config.n:
        raise ValueError(
            f"the construction needs N <= n, got N={config.N} > n={config.n}")
    t0 = time.perf_counter()
    instance = problems.build_hard_case(config.n, config.N, seed=config.seed)
    data = np.array([_rep_hardcase(config, r, instance)
                     for r in range(config.reps)])
    n = data.shape[0]
    freq = float(np.mean(data[:, 0]))
    on_event = data[data[:, 0] > 0.0]
    gap_mean, gap_se = _mean_se(on_event[:, 2]) if on_event.size else (math.nan, math.nan)
    saa_max = float(np.max(np.abs(on_event[:, 1]))) if on_event.size else math.nan
    rows = (
        ReportRow("event_frequency", freq, _binom_se(freq, n)),
        ReportRow("event_threshold", 1.0 - math.exp(-1.0), 0.0),
        ReportRow("conditional_gap_mean", gap_mean, gap_se),
        ReportRow("cap_elevation", instance.cap_delta, 0.0),
        ReportRow("saa_value_at_dead_center_max_abs", saa_max, 0.0),
        ReportRow("n_centers", float(instance.centers.shape[0]), 0.0),
    )
    return ExperimentReport(config, rows, runtime_s=time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# inaccuracy curves

def _rep_curves(config: ExperimentConfig, r: int):
    rng = philox_rng(config.seed, r)
    instance = _instance_for_rep(config, r, rng)
    opt = true_opt(instance, tol=1e-9)
    out = []
    N = config.curve_n_min
    while N <= config.curve_n_max:
        xi = sample(instance, N, rng=rng).xi
        x_hat, _ = _solve_saa(instance, xi, config.solve_tol)
        gap_saa = exact_f(instance, x_hat) - opt
        run = run_smd(instance, N, rng=rng)
        gap_smd = exact_f(instance, run.iterates_avg) - opt
        out.extend([gap_saa, gap_smd])
        N *= 2
    return tuple(out)


def run_inaccuracy_curves(config: ExperimentConfig) -> ExperimentReport:
    """Mean optimality gap of SAA and SMD solutions over a dyadic sample grid."""
    t0 = time.perf_counter()
    grid = []
    N = config.curve_n_min
    while N <= config.curve_n_max:
        grid.append(N)
        N *= 2
    data = _collect(config, _rep_curves, 2 * len(grid))
    curves = []
    for i, N in enumerate(grid):
        m_saa, se_saa = _mean_se(data[:, 2 * i])
        m_smd, se_smd = _mean_se(data[:, 2 * i + 1])
        curves.append((N, "saa", m_saa, se_saa))
        curves.append((N, "smd", m_smd, se_smd))
    saa_means = [c[2] for c in curves if c[1] == "saa"]
    smd_means = [c[2] for c in curves if c[1] == "smd"]
    rows = (
        ReportRow("saa_loglog_slope", loglog_slope(grid, saa_means), 0.0),
        ReportRow("smd_loglog_slope", loglog_slope(grid, smd_means), 0.0),
        ReportRow("saa_below_smd_at_max_n",
                  float(saa_means[-1] <= smd_means[-1]), 0.0),
    )
    return ExperimentReport(config, rows, curves=tuple(curves),
                            runtime_s=time.perf_counter() - t0)


def loglog_slope(ns, means) -> float:
    """Least-squares slope of log(mean gap) against log(N)."""
    xs = np.log([float(n) for n in ns])
    ys = np.log(np.maximum(np.asarray(means, dtype=float), 1e-300))
    xs = xs - xs.mean()
    return float(xs.dot(ys) / xs.dot(xs))


# ---------------------------------------------------------------------------
# CSV output

def report_to_csv(report: ExperimentReport) -> str:
    cfg = report.config
    echo = " ".join(f"{k}={v}" for k, v in sorted(asdict(cfg).items()))
    lines = [f"# config: {echo}"]
    lines.append("experiment,instance_kind,n,N,alpha,reps,statistic,value,se,excluded,seed")
    for row in report.rows:
        lines.append(",".join([
            cfg.experiment, cfg.instance_kind, str(cfg.n), str(cfg.N),
            repr(cfg.alpha), str(cfg.reps), row.statistic, repr(row.value),
            repr(row.se), str(row.excluded), str(cfg.seed)]))
    if report.curves:
        lines.append("N,method,mean_gap,se")
        for N, method, mean_gap, se in report.curves:
            lines.append(f"{N},{method},{mean_gap!r},{se!r}")
    return "\n".join(lines) + "\n"
