"""Figure rendering for experiment reports (PNG files next to the CSV output)."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .experiments import ExperimentReport  # noqa: E402

__all__ = ["render_report"]


def _bar_rows(ax, report, stats, title, hline=None, hlabel=None):
    rows = [r for r in report.rows if r.statistic in stats]
    xs = range(len(rows))
    ax.bar(xs, [r.value for r in rows], yerr=[r.se for r in rows],
           capsize=4, color="#4878a8")
    ax.set_xticks(list(xs))
    ax.set_xticklabels([r.statistic for r in rows], rotation=20, ha="right", fontsize=8)
    if hline is not None:
        ax.axhline(hline, color="#a84848", ls="--", lw=1, label=hlabel)
        ax.legend(fontsize=8)
    ax.set_title(title, fontsize=10)


def render_report(report: ExperimentReport, path: str) -> None:
    """Render the report's headline statistics (or curves) to ``path``."""
    cfg = report.config
    fig, ax = plt.subplots(figsize=(6.0, 4.0), dpi=120)
    tag = f"{cfg.instance_kind} n={cfg.n} N={cfg.N} reps={cfg.reps}"
    if cfg.experiment == "curves" and report.curves:
        for method, color in (("saa", "#4878a8"), ("smd", "#a84848")):
            pts = [(c[0], c[2], c[3]) for c in report.curves if c[1] == method]
            ns = [p[0] for p in pts]
            means = [max(p[1], 1e-12) for p in pts]
            errs = [p[2] for p in pts]
            ax.errorbar(ns, means, yerr=errs, marker="o", ms=3, lw=1,
                        color=color, label=method.upper())
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("sample size N")
        ax.set_ylabel("mean optimality gap")
        ax.legend(fontsize=9)
        ax.set_title(f"solution inaccuracy vs N ({tag})", fontsize=10)
    elif cfg.experiment == "coverage":
        _bar_rows(ax, report, ("coverage_asymptotic", "coverage_saa"),
                  f"interval coverage ({tag})", hline=1.0 - cfg.alpha,
                  hlabel="nominal level")
        ax.set_ylim(0.0, 1.05)
    elif cfg.experiment == "widths":
        _bar_rows(ax, report, ("width_ratio_mean",), f"width ratio ({tag})")
    elif cfg.experiment == "minimax":
        _bar_rows(ax, report, ("asymptotic_failures", "deviation_bound_failures"),
                  f"lower-bound failure rates ({tag})")
        ax.set_ylim(0.0, 1.0)
    elif cfg.experiment == "constrained":
        _bar_rows(ax, report, ("infeasible_asis", "infeasible_relaxed"),
                  f"sample-problem infeasibility ({tag})",
                  hline=report.value("analytic_infeasibility"),
                  hlabel="analytic (best asset)")
        ax.set_ylim(0.0, max(0.4, report.value("infeasible_asis") * 1.5 + 0.05))
    elif cfg.experiment == "hardcase":
        _bar_rows(ax, report, ("event_frequency",),
                  f"dead-cap event rate ({tag})",
                  hline=1.0 - math.exp(-1.0), hlabel="1 - 1/e")
        ax.set_ylim(0.0, 1.0)
    else:
        _bar_rows(ax, report, tuple(r.statistic for r in report.rows), tag)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
