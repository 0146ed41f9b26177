import numpy as np
import pytest

from saabounds.experiments import (ExperimentConfig, loglog_slope,
                                   report_to_csv, run_constrained_stability,
                                   run_coverage, run_hard_case,
                                   run_inaccuracy_curves,
                                   run_minimax_lower_bound, run_width_ratios)


def small_coverage_config(**kw):
    base = dict(experiment="coverage", instance_kind="quadratic", n=2, N=20,
                reps=40, alpha=0.1, seed=11)
    base.update(kw)
    return ExperimentConfig(**base)


def test_reports_are_reproducible():
    cfg = small_coverage_config()
    a = run_coverage(cfg)
    b = run_coverage(cfg)
    assert a.rows == b.rows
    assert report_to_csv(a) == report_to_csv(b)


def test_serial_equals_parallel():
    serial = run_coverage(small_coverage_config())
    parallel = run_coverage(small_coverage_config(workers=2))
    assert serial.rows == parallel.rows


def test_coverage_rows_and_conservation():
    cfg = small_coverage_config(reps=60)
    rep = run_coverage(cfg)
    stats = {r.statistic: r for r in rep.rows}
    assert 0.0 <= stats["coverage_asymptotic"].value <= 1.0
    assert stats["coverage_saa"].value == 1.0
    assert stats["coverage_asymptotic"].se > 0.0
    failed = stats["replications_failed"].value
    assert failed == 0.0


def test_saa_interval_covers_in_every_cell_kind():
    for kind, n, N in (("quadratic", 3, 30), ("gaussian_var", 3, 30),
                       ("cvar", 2, 60)):
        cfg = small_coverage_config(instance_kind=kind, n=n, N=N, reps=25)
        rep = run_coverage(cfg)
        assert rep.value("coverage_saa") == 1.0, kind


def test_width_ratio_exclusion_accounting():
    cfg = ExperimentConfig(experiment="widths", instance_kind="quadratic",
                           n=2, N=50, reps=60, alpha=0.1, seed=5)
    rep = run_width_ratios(cfg)
    stats = {r.statistic: r for r in rep.rows}
    retained = stats["replications_retained"].value
    excluded = stats["width_ratio_mean"].excluded
    failed = stats["replications_failed"].value
    assert retained + excluded + failed == cfg.reps
    assert stats["width_ratio_mean"].value > 1.0


def test_width_ratio_exclusion_rule_flag():
    kw = dict(experiment="widths", instance_kind="quadratic", n=2, N=50,
              reps=60, alpha=0.1, seed=5)
    strict = run_width_ratios(ExperimentConfig(**kw))
    loose = run_width_ratios(ExperimentConfig(exclude_noncovering=False, **kw))
    assert (loose.value("replications_retained")
            >= strict.value("replications_retained"))


def test_fixed_instance_mode_reuses_one_instance():
    cfg = small_coverage_config(fixed_instance=True, reps=30)
    rep = run_coverage(cfg)
    assert rep.value("replications_failed") == 0.0
    # fixed instance changes the numbers relative to redraw mode
    redraw = run_coverage(small_coverage_config(reps=30))
    assert rep.rows != redraw.rows


def test_minimax_experiment_smoke():
    cfg = ExperimentConfig(experiment="minimax", n=2, N=128, reps=25,
                           eps_cvar=0.5, alpha=0.1, seed=3)
    rep = run_minimax_lower_bound(cfg)
    stats = {r.statistic: r.value for r in rep.rows}
    assert stats["deviation_bound_failures"] == 0.0
    assert 0.0 <= stats["asymptotic_failures"] <= 1.0
    assert stats["deviation_lower_mean"] < stats["asymptotic_lower_mean"]


def test_constrained_experiment_analytics_and_relaxation():
    cfg = ExperimentConfig(experiment="constrained", n=2, N=128, reps=60,
                           eps_cvar=0.1, seed=1)
    rep = run_constrained_stability(cfg)
    stats = {r.statistic: r.value for r in rep.rows}
    assert stats["analytic_infeasibility"] == pytest.approx(0.1289, abs=1e-4)
    assert stats["relaxation_delta"] == pytest.approx(0.5815, abs=1e-4)
    assert stats["infeasible_relaxed"] <= stats["infeasible_asis"]
    assert stats["opt_n_relaxed_mean"] <= stats["opt_n_asis_mean"] + 1e-12


def test_hard_case_experiment_and_precondition():
    cfg = ExperimentConfig(experiment="hardcase", n=8, N=8, reps=150, seed=2)
    rep = run_hard_case(cfg)
    stats = {r.statistic: r.value for r in rep.rows}
    assert stats["conditional_gap_mean"] == pytest.approx(stats["cap_elevation"],
                                                          abs=1e-12)
    assert stats["saa_value_at_dead_center_max_abs"] == 0.0
    assert stats["event_frequency"] >= 0.45
    with pytest.raises(ValueError, match="N <= n"):
        run_hard_case(ExperimentConfig(experiment="hardcase", n=4, N=5, reps=1))


def test_curves_report_structure():
    cfg = ExperimentConfig(experiment="curves", instance_kind="quadratic",
                           n=5, reps=4, seed=8, curve_n_min=32, curve_n_max=256)
    rep = run_inaccuracy_curves(cfg)
    ns = sorted({c[0] for c in rep.curves})
    assert ns == [32, 64, 128, 256]
    methods = {c[1] for c in rep.curves}
    assert methods == {"saa", "smd"}
    assert all(c[2] >= -1e-9 for c in rep.curves)  # gaps are nonnegative
    assert rep.value("saa_loglog_slope") < 0.0


def test_loglog_slope_recovers_power_law():
    ns = [32, 64, 128, 256, 512]
    means = [10.0 * n ** -0.5 for n in ns]
    assert loglog_slope(ns, means) == pytest.approx(-0.5, abs=1e-12)


def test_csv_schema():
    rep = run_coverage(small_coverage_config(reps=10))
    text = report_to_csv(rep)
    lines = text.strip().split("\n")
    assert lines[0].startswith("# config:")
    assert lines[1] == ("experiment,instance_kind,n,N,alpha,reps,statistic,"
                        "value,se,excluded,seed")
    for line in lines[2:]:
        assert len(line.split(",")) == 11
    assert "coverage,quadratic,2,20,0.1,10," in text


def test_curve_csv_section():
    cfg = ExperimentConfig(experiment="curves", instance_kind="quadratic",
                           n=4, reps=2, seed=9, curve_n_min=32, curve_n_max=64)
    rep = run_inaccuracy_curves(cfg)
    text = report_to_csv(rep)
    assert "N,method,mean_gap,se" in text
    assert "32,saa," in text and "64,smd," in text
