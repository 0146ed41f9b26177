import math

import numpy as np
import pytest

from saabounds.problems import (build_cvar_instance, build_quadratic_instance,
                                exact_f, philox_rng, true_opt)
from saabounds.smd import run_smd, smd_step_scale


def test_run_is_deterministic():
    inst = build_quadratic_instance(6, rng=philox_rng(1))
    a = run_smd(inst, 500, seed=3, stream=2)
    b = run_smd(inst, 500, seed=3, stream=2)
    assert np.array_equal(a.iterates_avg, b.iterates_avg)
    assert a.sum_dual_norm_sq == b.sum_dual_norm_sq
    c = run_smd(inst, 500, seed=3, stream=5)
    assert not np.array_equal(a.iterates_avg, c.iterates_avg)


def test_average_is_feasible():
    inst = build_quadratic_instance(8, rng=philox_rng(2))
    run = run_smd(inst, 1000, seed=1)
    assert abs(float(run.iterates_avg.sum()) - 1.0) <= 1e-12
    assert np.all(run.iterates_avg > 0.0)


def test_regret_certificate_holds_for_all_vertices():
    for seed in range(5):
        inst = build_quadratic_instance(7, rng=philox_rng(seed + 10))
        run = run_smd(inst, 400, seed=seed)
        for i in range(7):
            u = np.zeros(7)
            u[i] = 1.0
            assert run.regret(u) <= run.regret_bound(u) + 1e-12


def test_regret_certificate_mixed_domain():
    inst = build_cvar_instance(3, 0.1, 0.9, 0.5, rng=philox_rng(30))
    run = run_smd(inst, 300, seed=4)
    assert run.mixed_domain
    for i in range(3):
        u = np.zeros(4)
        u[i] = 1.0
        u[-1] = 0.5
        assert run.regret(u) <= run.regret_bound(u) + 1e-12
    assert abs(float(run.iterates_avg[:-1].sum()) - 1.0) <= 1e-12
    assert -1.0 <= run.iterates_avg[-1] <= 1.0


def test_zero_noise_linear_objective_concentrates_on_best_vertex():
    # theta in {0, 1} makes the scenarios deterministic: F(x, xi) = k0 * mu'x
    n = 5
    theta = np.array([1.0, 1.0, 1.0, 1.0, 0.0])  # unique best vertex: the last
    inst = build_quadratic_instance(n, kappa0=1.0, kappa1=1e-12, theta=theta)
    N = 4096
    run = run_smd(inst, N, seed=0)
    gap = exact_f(inst, run.iterates_avg) - true_opt(inst, tol=1e-12)
    bound = 2.0 * inst.geometry.omega_cap ** 2 / math.sqrt(N)  # O(1/sqrt N)
    assert gap <= bound
    assert run.iterates_avg[-1] > 0.9  # mass on the best vertex


def test_trajectory_checkpoints_are_dyadic():
    inst = build_quadratic_instance(4, rng=philox_rng(3))
    run = run_smd(inst, 64, seed=2, record_objective=lambda x: exact_f(inst, x))
    ts = [t for t, _ in run.trajectory_summary]
    assert ts == [1, 2, 4, 8, 16, 32, 64]


def test_step_scale_formula():
    inst = build_quadratic_instance(4, rng=philox_rng(5))
    geo = inst.geometry
    want = 2.0 * geo.radius * geo.omega_cap / (inst.constants.m2 * math.sqrt(256))
    assert smd_step_scale(inst, 256) == pytest.approx(want, rel=1e-14)


def test_gap_decays_with_sample_size():
    inst = build_quadratic_instance(10, rng=philox_rng(7))
    opt = true_opt(inst, tol=1e-11)
    gaps = []
    for N in (64, 4096):
        g = [exact_f(inst, run_smd(inst, N, seed=s).iterates_avg) - opt
             for s in range(10)]
        gaps.append(float(np.mean(g)))
    assert gaps[1] < gaps[0]
