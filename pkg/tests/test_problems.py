import math

import numpy as np
import pytest

from saabounds.problems import (CapabilityError, InstanceKind,
                                build_constrained_instance,
                                build_cvar_instance,
                                build_gaussian_var_instance, build_hard_case,
                                build_minimax_instance,
                                build_quadratic_instance, component_costs,
                                constants_cvar, constants_gaussian_var,
                                constants_quadratic, estimation_costs,
                                exact_components, exact_f,
                                gaussian_sup_constant,
                                gaussian_sup_constant_improved,
                                hard_case_delta, instance_from_text,
                                instance_to_text, philox_rng, sample,
                                scenario_costs, true_opt)
from saabounds.solvers import minimax_cvar_lp, solve_lp


# ---------------------------------------------------------------------------
# moment constants

def test_quadratic_constants():
    c = constants_quadratic(0.1, 0.9)
    assert c.m1 == pytest.approx(0.65, abs=1e-15)
    assert c.m2 == pytest.approx(2.0, abs=1e-15)
    c = constants_quadratic(1.0, 0.0)
    assert (c.m1, c.m2) == (2.0, 2.0)
    with pytest.raises(ValueError):
        constants_quadratic(0.0, 0.0)


def test_gaussian_var_constants_structure():
    nu = math.sqrt(2.0 * math.e ** 2 / (math.e ** 2 - 1.0))
    assert nu == pytest.approx(1.52, abs=5e-3)
    c = constants_gaussian_var(0.9, 0.1, math.sqrt(6.0), 10)
    want_m1 = (nu * 0.9 + math.sqrt(2.0) * 0.1) * math.sqrt(6.0)
    assert c.m1 == pytest.approx(want_m1, rel=1e-14)
    want_m2 = (1.0 * gaussian_sup_constant(math.sqrt(6.0), 10)
               + 0.1 * math.sqrt(6.0) * math.sqrt(2.0 / math.pi))
    assert c.m2 == pytest.approx(want_m2, rel=1e-14)


@pytest.mark.parametrize("n,improved_want,plain_want", [
    (2, 4.97, 5.68), (10, 6.46, 7.19), (20, 7.05, 7.74), (100, 8.27, 8.90)])
def test_sup_constant_footnote_values(n, improved_want, plain_want):
    s = math.sqrt(6.0)
    assert gaussian_sup_constant_improved(s, n) == pytest.approx(improved_want, abs=0.01)
    assert gaussian_sup_constant(s, n) == pytest.approx(plain_want, abs=0.01)


def test_sup_constant_base_case():
    assert gaussian_sup_constant(1.0, 1) == pytest.approx(2.0, abs=1e-14)


def test_sup_constant_moment_condition_by_monte_carlo():
    rng = np.random.default_rng(0)
    n, sbar = 10, math.sqrt(6.0)
    M = gaussian_sup_constant(sbar, n)
    xi = rng.normal(0.0, sbar, size=(1_000_000, n))
    vals = np.exp((np.abs(xi).max(axis=1) / M) ** 2)
    mean = float(vals.mean())
    se = float(vals.std(ddof=1)) / math.sqrt(len(vals))
    assert mean <= math.e * (1.0 + 3.0 * se)


def test_cvar_constants():
    c = constants_cvar(0.9, 0.1, 0.1, 2)
    assert c.m1 == pytest.approx(3.8, abs=1e-14)
    c0 = constants_cvar(0.0, 1.0, 0.5, 0)
    assert c0.m2 == pytest.approx(2.0, abs=1e-14)
    c1 = constants_cvar(0.0, 0.5, 0.25, 3)
    assert c1.m2 == pytest.approx((0.5 / 0.25) * math.sqrt(5.0), rel=1e-14)


# ---------------------------------------------------------------------------
# samplers

def test_bernoulli_sampler_degenerate_and_mean():
    inst = build_quadratic_instance(3, theta=np.ones(3))
    xi = sample(inst, 100, seed=0).xi
    assert np.all(xi == 1.0)
    inst = build_quadratic_instance(4, rng=philox_rng(9))
    xi = sample(inst, 1_000_000, seed=1).xi
    want = 2.0 * inst.theta - 1.0
    assert np.allclose(xi.mean(axis=0), want, atol=0.005)


def test_gaussian_sampler_covariance():
    inst = build_gaussian_var_instance(3, rng=philox_rng(4))
    xi = sample(inst, 1_000_000, seed=2).xi
    cov = np.cov(xi.T)
    assert np.allclose(np.diag(cov), inst.sigma_diag, rtol=0.02)
    off = cov - np.diag(np.diag(cov))
    assert float(np.max(np.abs(off))) < 0.02 * float(np.max(inst.sigma_diag))


def test_sampler_determinism_and_streams():
    inst = build_quadratic_instance(3, rng=philox_rng(1))
    a = sample(inst, 50, seed=7, stream=3).xi
    b = sample(inst, 50, seed=7, stream=3).xi
    c = sample(inst, 50, seed=7, stream=4).xi
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


# ---------------------------------------------------------------------------
# exact expectations

def test_exact_f_quadratic_degenerate():
    inst = build_quadratic_instance(1, kappa0=0.3, kappa1=0.8, theta=np.array([1.0]))
    assert exact_f(inst, np.array([1.0])) == pytest.approx(0.3 + 0.4, abs=1e-15)


def test_exact_f_gaussian_var_formula_and_monte_carlo():
    inst = build_gaussian_var_instance(3, rng=philox_rng(6))
    rng = philox_rng(123)
    x = rng.dirichlet(np.ones(3))
    sig = math.sqrt(float(np.sum(inst.sigma_diag * x * x)))
    assert exact_f(inst, x) == pytest.approx(
        inst.kappa1 * math.sqrt(2.0 / math.pi) * sig, rel=1e-14)
    xi = sample(inst, 100_000, seed=5).xi
    vals = scenario_costs(inst, x, xi)
    se = float(vals.std(ddof=1)) / math.sqrt(len(vals))
    assert abs(float(vals.mean()) - exact_f(inst, x)) <= 3.0 * se


def test_exact_f_cvar_enumeration_vs_monte_carlo():
    inst = build_cvar_instance(2, 0.1, 0.9, 0.4, rng=philox_rng(8))
    x = np.array([0.3, 0.7, -0.2])  # [allocation..., threshold]
    want = exact_f(inst, x)
    xi = sample(inst, 1_000_000, seed=3).xi
    vals = scenario_costs(inst, x, xi)
    se = float(vals.std(ddof=1)) / math.sqrt(len(vals))
    assert abs(float(vals.mean()) - want) <= 3.0 * se


def test_exact_f_quadratic_matches_monte_carlo():
    inst = build_quadratic_instance(4, rng=philox_rng(11))
    rng = philox_rng(31)
    for _ in range(5):
        x = rng.dirichlet(np.ones(4))
        xi = sample(inst, 100_000, rng=rng).xi
        vals = scenario_costs(inst, x, xi)
        se = float(vals.std(ddof=1)) / math.sqrt(len(vals))
        assert abs(float(vals.mean()) - exact_f(inst, x)) <= 3.5 * se


def test_enumeration_capability_limit():
    inst = build_cvar_instance(21, 0.1, 0.9, 0.5, rng=philox_rng(2))
    with pytest.raises(CapabilityError, match="Monte Carlo"):
        exact_f(inst, np.concatenate([np.full(21, 1.0 / 21), [0.0]]))


def test_estimation_costs_drop_zero_mean_term():
    inst = build_gaussian_var_instance(3, rng=philox_rng(14))
    xi = sample(inst, 1000, seed=9).xi
    x = np.array([0.2, 0.5, 0.3])
    est = estimation_costs(inst, x, xi)
    assert np.allclose(est, inst.kappa1 * np.abs(xi.dot(x)))
    full = scenario_costs(inst, x, xi)
    assert est.mean() != pytest.approx(full.mean(), abs=1e-6)
    assert float(est.std()) < float(full.std())


# ---------------------------------------------------------------------------
# ground-truth optima

def test_true_opt_gaussian_var_closed_form():
    inst = build_gaussian_var_instance(2, kappa1=0.1,
                                       sigma_diag=np.array([1.0, 4.0]))
    want = 0.1 * math.sqrt(2.0 / math.pi) * math.sqrt(4.0 / 5.0)
    assert true_opt(inst) == pytest.approx(want, rel=1e-12)
    assert want == pytest.approx(0.071365, abs=1e-6)
    # cross-check by scanning the one-dimensional simplex
    ts = np.linspace(0.0, 1.0, 200_001)
    scan = 0.1 * math.sqrt(2.0 / math.pi) * np.sqrt(ts ** 2 + 4.0 * (1 - ts) ** 2)
    assert float(np.min(scan)) == pytest.approx(true_opt(inst), abs=1e-9)


def test_true_opt_quadratic_symmetry():
    inst = build_quadratic_instance(5, theta=np.full(5, 0.7))
    bary = np.full(5, 0.2)
    assert true_opt(inst, tol=1e-11) == pytest.approx(exact_f(inst, bary), abs=1e-9)


def test_true_opt_cvar_against_grid():
    inst = build_cvar_instance(2, 0.2, 0.8, 0.3, rng=philox_rng(20))
    want = true_opt(inst)
    ts = np.linspace(0.0, 1.0, 1001)
    x0s = np.linspace(-1.0, 1.0, 2001)
    pats = np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]], dtype=float)
    th = inst.theta
    probs = np.array([th[0] * th[1], th[0] * (1 - th[1]),
                      (1 - th[0]) * th[1], (1 - th[0]) * (1 - th[1])])
    grid = np.column_stack([ts, 1.0 - ts])
    z = grid.dot(pats.T)  # (T, 4)
    excess = np.maximum(z[:, None, :] - x0s[None, :, None], 0.0)
    vals = (0.2 * (z * probs).sum(axis=1)[:, None]
            + 0.8 * (x0s[None, :] + excess.dot(probs) / 0.3))
    best = float(np.min(vals))
    assert want <= best + 1e-9
    assert best - want <= 0.02  # grid resolution error bound


def test_true_opt_hard_case_is_zero():
    inst = build_hard_case(4, 3, seed=1)
    assert true_opt(inst) == 0.0


# ---------------------------------------------------------------------------
# builders

def test_minimax_components_tie_at_recomputed_minimizer():
    inst = build_minimax_instance(2, 0.5, seed=3)
    pats = np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]], dtype=float)
    th = inst.theta
    probs = np.array([th[0] * th[1], th[0] * (1 - th[1]),
                      (1 - th[0]) * th[1], (1 - th[0]) * (1 - th[1])])
    lp = minimax_cvar_lp(pats, inst.eps_cvar, inst.chi, weights=probs)
    res = solve_lp(lp, tol=1e-11)
    comps = exact_components(inst, res.x[:3])
    assert np.allclose(comps, comps[0], atol=1e-6)
    assert res.value == pytest.approx(0.0, abs=1e-9)
    assert true_opt(inst) == pytest.approx(0.0, abs=1e-9)


def test_minimax_uniform_offset_shifts_value():
    from dataclasses import replace
    inst = build_minimax_instance(2, 0.5, seed=4)
    shifted = replace(inst, chi=tuple(c + 0.25 for c in inst.chi))
    assert true_opt(shifted) == pytest.approx(true_opt(inst) + 0.25, abs=1e-9)


def test_constrained_instance_analytics():
    inst = build_constrained_instance()
    assert inst.makeup["infeasibility_probability"] == pytest.approx(0.1289, abs=1e-4)
    assert inst.makeup["relaxation_delta"] == pytest.approx(0.5815, abs=1e-4)
    # objective component: closed-form threshold minimization vs 1-d scan
    u = np.array([0.25, 0.75])
    m = float(inst.mean.dot(u))
    s = math.sqrt(float(np.sum(inst.sigma_diag * u * u)))
    from saabounds.problems import _gaussian_cvar, _gaussian_partial_mean
    closed = _gaussian_cvar(m, s, inst.eps_cvar)
    lo, hi = m - 2 * s, m + 8 * s
    gr = (math.sqrt(5.0) - 1.0) / 2.0
    fn = lambda v: v + _gaussian_partial_mean(m, s, v) / inst.eps_cvar
    a, b = lo, hi
    c_, d_ = b - gr * (b - a), a + gr * (b - a)
    for _ in range(200):
        if fn(c_) < fn(d_):
            b, d_ = d_, c_
            c_ = b - gr * (b - a)
        else:
            a, c_ = c_, d_
            d_ = a + gr * (b - a)
    assert closed == pytest.approx(fn(0.5 * (a + b)), abs=1e-8)


def test_component_costs_layouts():
    inst = build_constrained_instance()
    xi = sample(inst, 64, seed=0).xi
    x = np.array([0.5, 0.5, 1.0])
    f0 = component_costs(inst, x, xi, 0)
    f1 = component_costs(inst, x, xi, 1)
    z = xi.dot(x[:2])
    assert np.allclose(f0, 1.0 + np.maximum(z - 1.0, 0.0) / inst.eps_cvar)
    assert np.allclose(f1, inst.chi - z)


# ---------------------------------------------------------------------------
# hard case

def test_hard_case_delta_value():
    assert hard_case_delta() == pytest.approx(0.0078023, abs=1e-7)


def test_hard_case_packing_properties():
    inst = build_hard_case(6, 4, seed=2)
    V = inst.centers
    assert V.shape[0] == min(2 ** 6, 4096)
    assert np.allclose(np.linalg.norm(V, axis=1), 1.0, atol=1e-12)
    gram = V.dot(V.T)
    np.fill_diagonal(gram, -1.0)
    assert float(np.max(gram)) < math.cos(2.0 * 0.125)


def test_hard_case_lipschitz_and_mask_sampling():
    inst = build_hard_case(5, 3, seed=7)
    rng = philox_rng(55)
    worst = 0.0
    for _ in range(500):
        x = rng.normal(size=5)
        x /= max(np.linalg.norm(x), 1.0)
        active = inst.centers[inst.centers.dot(x) > 1.0 - inst.cap_delta]
        if active.size:
            g = active.sum(axis=0)
            worst = max(worst, float(np.linalg.norm(g)))
    assert worst <= 1.0 + 1e-12  # disjoint caps: at most one active center
    masks = sample(inst, 10, seed=4).xi
    assert set(np.unique(masks)) <= {0.0, 1.0}
    assert masks.shape == (10, inst.centers.shape[0])


def test_hard_case_needs_three_dimensions():
    with pytest.raises(ValueError):
        build_hard_case(2, 2)


# ---------------------------------------------------------------------------
# serialization

@pytest.mark.parametrize("build", [
    lambda: build_quadratic_instance(3, rng=philox_rng(41)),
    lambda: build_gaussian_var_instance(3, rng=philox_rng(42), improved_m2=True),
    lambda: build_cvar_instance(2, 0.3, 0.7, 0.25, rng=philox_rng(43)),
    lambda: build_constrained_instance(),
])
def test_instance_round_trip_exact(build):
    inst = build()
    back = instance_from_text(instance_to_text(inst))
    assert back.kind is inst.kind
    assert back.kappa0 == inst.kappa0 and back.kappa1 == inst.kappa1
    for name in ("theta", "sigma_diag", "mean"):
        a, b = getattr(inst, name), getattr(back, name)
        assert (a is None) == (b is None)
        if a is not None:
            assert np.array_equal(a, b)
    assert back.constants.m1 == inst.constants.m1
    assert back.constants.m2 == inst.constants.m2


def test_minimax_round_trip():
    inst = build_minimax_instance(2, 0.5, seed=9)
    back = instance_from_text(instance_to_text(inst))
    assert back.kind is InstanceKind.MINIMAX_CVAR
    assert np.array_equal(back.theta, inst.theta)
    assert back.chi == pytest.approx(inst.chi, abs=0.0)


# ---------------------------------------------------------------------------
# moment-condition Monte Carlo validation (value side)

@pytest.mark.parametrize("build,n_draws", [
    (lambda r: build_quadratic_instance(4, rng=r), 100_000),
    (lambda r: build_gaussian_var_instance(4, rng=r), 100_000),
    (lambda r: build_cvar_instance(3, 0.9, 0.1, 0.9, rng=r), 100_000),
])
def test_value_moment_condition(build, n_draws):
    inst = build(philox_rng(71))
    rng = philox_rng(72)
    m1 = inst.constants.m1
    for _ in range(20):
        if inst.kind is InstanceKind.CVAR:
            alloc = rng.dirichlet(np.ones(inst.theta.size))
            x = np.concatenate([alloc, [float(rng.uniform(-1, 1))]])
        else:
            x = rng.dirichlet(np.ones(inst.n))
        xi = sample(inst, n_draws, rng=rng).xi
        dev = scenario_costs(inst, x, xi) - exact_f(inst, x)
        vals = np.exp((dev / m1) ** 2)
        se = float(vals.std(ddof=1)) / math.sqrt(n_draws)
        assert float(vals.mean()) <= math.e * (1.0 + 3.0 * se) + 3.0 * se
