"""Command-line front end.

Subcommands:
    bounds       -- evaluate the deviation margins, risks, and width ratio
    constants    -- the per-family moment-constant calculators
    experiment   -- the Monte Carlo studies (coverage|widths|minimax|
                    constrained|hardcase|curves), CSV out, optional PNG
    solve        -- one-off SAA solve with its optimality certificate

Exit codes: 0 success, 2 argument/parse error, 3 domain error.  The default
seed comes from ``SAABOUNDS_SEED`` when set.  ``--config`` reads a flat
key=value file (keys are the experiment-config field names); explicit flags
override file values.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import fields

import numpy as np

from . import bounds as bnd
from . import experiments as xp
from . import problems
from .geometry import euclidean_spec, mixed_spec, simplex_l1_spec
from .solvers import lp_to_text, saa_lp_reformulate, solve_lp

_EXPERIMENTS = {
    "coverage": xp.run_coverage,
    "widths": xp.run_width_ratios,
    "minimax": xp.run_minimax_lower_bound,
    "constrained": xp.run_constrained_stability,
    "hardcase": xp.run_hard_case,
    "curves": xp.run_inaccuracy_curves,
}


def _default_seed() -> int:
    return int(os.environ.get("SAABOUNDS_SEED", "0"))


def _geometry(name: str, dim: int):
    if name == "euclidean":
        return euclidean_spec(max(dim, 1))
    if name == "l1-simplex":
        return simplex_l1_spec(max(dim, 1))
    if name == "mixed":
        return mixed_spec(dim)
    raise ValueError(f"unknown geometry {name!r}")


def _cmd_bounds(args) -> int:
    geo = _geometry(args.geometry, args.dim)
    consts = bnd.MomentConstants(args.m1, args.m2)
    params = bnd.optimize_ci_params(args.alpha, args.n_samples, consts, geo,
                                    rule=args.rule)
    a = bnd.bound_a(params.mu1, params.N, consts.m1)
    b = bnd.bound_b(params.mu2, params.s, params.lam, params.N, consts, geo)
    beta = bnd.risk_beta(params)
    ci = bnd.ci_saa_theoretical(args.opt_n, params, consts, geo)
    wbar = bnd.lower_width(args.alpha, args.m1, args.n_samples)
    ratio = (a + b) / wbar if wbar > 0.0 else math.inf
    if wbar == 0.0:
        print("warning: width floor is 0 at alpha = 0.5 (zero quantile)",
              file=sys.stderr)
    items = [
        ("mu1", params.mu1), ("mu2", params.mu2), ("s", params.s),
        ("lambda", params.lam), ("margin_a", a), ("margin_b", b),
        ("risk_beta", beta), ("ci_low", ci.low), ("ci_up", ci.up),
        ("width_floor", wbar), ("width_ratio", ratio),
    ]
    if args.csv:
        print("quantity,value")
        for k, v in items:
            print(f"{k},{v!r}")
    else:
        for k, v in items:
            print(f"{k:>12} = {v:.10g}")
    return 0


def _cmd_constants(args) -> int:
    if args.family == "quadratic":
        c = problems.constants_quadratic(args.kappa0, args.kappa1)
    elif args.family == "gaussian-var":
        c = problems.constants_gaussian_var(args.kappa0, args.kappa1,
                                            args.sigma_max, args.dim,
                                            improved=args.improved)
    elif args.family == "cvar":
        c = problems.constants_cvar(args.kappa0, args.kappa1, args.eps, args.dim)
    else:
        m = problems.gaussian_sup_constant(args.sigma_max, args.dim)
        print(f"sup_norm_scale = {m:.10g}")
        return 0
    print(f"m1 = {c.m1:.10g}")
    print(f"m2 = {c.m2:.10g}")
    return 0


def _read_config_file(path: str) -> dict:
    known = {f.name for f in fields(xp.ExperimentConfig)}
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, val = line.partition("=")
            key = key.strip().replace("-", "_")
            if not sep or key not in known:
                raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
            out[key] = val.strip()
    return out


def _coerce(name: str, raw: str):
    typed = {f.name: f.type for f in fields(xp.ExperimentConfig)}
    t = typed[name]
    if t == "bool" or name in ("fixed_instance", "improved_m2", "exclude_noncovering"):
        return raw.lower() in ("1", "true", "yes")
    if t == "int" or name in ("n", "N", "reps", "seed", "workers",
                              "curve_n_min", "curve_n_max"):
        return int(raw)
    if name in ("experiment", "instance_kind"):
        return raw
    return float(raw)


def _cmd_experiment(args) -> int:
    values = {"experiment": args.which}
    if args.config:
        values.update({k: _coerce(k, v) for k, v in _read_config_file(args.config).items()})
        values["experiment"] = args.which
    overrides = dict(
        instance_kind=args.instance, n=args.n, N=args.n_samples, reps=args.reps,
        alpha=args.alpha, seed=args.seed, kappa0=args.kappa0, kappa1=args.kappa1,
        eps_cvar=args.eps, fixed_instance=args.fixed_instance,
        improved_m2=args.improved_m2, workers=args.workers,
        curve_n_min=args.curve_n_min, curve_n_max=args.curve_n_max)
    for key, val in overrides.items():
        if val is not None:
            values[key] = val
    config = xp.ExperimentConfig(**values)
    report = _EXPERIMENTS[args.which](config)
    csv_text = xp.report_to_csv(report)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(csv_text)
        print(f"wrote {args.out} ({len(report.rows)} statistics, "
              f"{report.runtime_s:.1f}s)", file=sys.stderr)
    else:
        sys.stdout.write(csv_text)
    if args.plot:
        from .plotting import render_report
        png = (args.out or f"{args.which}.csv").rsplit(".", 1)[0] + ".png"
        render_report(report, png)
        print(f"wrote {png}", file=sys.stderr)
    failed = next((r.value for r in report.rows
                   if r.statistic == "replications_failed"), 0.0)
    return 0 if failed == 0.0 else 1


def _cmd_solve(args) -> int:
    if args.instance_file:
        with open(args.instance_file, encoding="utf-8") as fh:
            instance = problems.instance_from_text(fh.read())
    else:
        rng = problems.philox_rng(args.seed, 0xFFFFFFFF)
        if args.instance == "quadratic":
            instance = problems.build_quadratic_instance(
                args.n, args.kappa0 or 0.1, args.kappa1 or 0.9, rng=rng)
        elif args.instance == "gaussian_var":
            instance = problems.build_gaussian_var_instance(
                args.n, args.kappa0 or 0.9, args.kappa1 or 0.1, rng=rng)
        elif args.instance == "cvar":
            instance = problems.build_cvar_instance(
                args.n, args.kappa0 or 0.1, args.kappa1 or 0.9, args.eps, rng=rng)
        else:
            raise ValueError(f"cannot build instance kind {args.instance!r} here")
    xi = problems.sample(instance, args.n_samples, seed=args.seed).xi
    if instance.kind is problems.InstanceKind.QUADRATIC_RISK:
        x, value = xp._solve_saa(instance, xi, args.tol)
        print(f"value = {value:.12g}")
        print("certificate = fw_gap")
        print(f"gap <= {args.tol:g}")
    else:
        lp = saa_lp_reformulate(instance, xi)
        if args.dump_lp:
            with open(args.dump_lp, "w", encoding="utf-8") as fh:
                fh.write(lp_to_text(lp))
        res = solve_lp(lp, tol=args.tol)
        print(f"value = {res.value:.12g}")
        print(f"certificate = {res.certificate.value}")
        print(f"gap = {res.gap:.3e}")
        print(f"pivots = {res.iterations}")
        x = res.x
    with np.printoptions(precision=6, suppress=True):
        print(f"solution = {np.asarray(x)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="saabounds", description=__doc__.split("\n")[0])
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bounds", help="deviation margins, risks, width ratio")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--m1", type=float, required=True)
    p.add_argument("--m2", type=float, required=True)
    p.add_argument("--n-samples", type=int, required=True)
    p.add_argument("--geometry", default="euclidean",
                   choices=("euclidean", "l1-simplex", "mixed"))
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--opt-n", type=float, default=0.0)
    p.add_argument("--rule", default="tied", choices=("tied", "equal"))
    p.add_argument("--csv", action="store_true")
    p.set_defaults(func=_cmd_bounds)

    p = sub.add_parser("constants", help="moment-constant calculators")
    p.add_argument("family", choices=("quadratic", "gaussian-var", "cvar", "sup-gaussian"))
    p.add_argument("--kappa0", type=float, default=0.1)
    p.add_argument("--kappa1", type=float, default=0.9)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--sigma-max", type=float, default=math.sqrt(6.0))
    p.add_argument("--dim", type=int, default=10)
    p.add_argument("--improved", action="store_true")
    p.set_defaults(func=_cmd_constants)

    p = sub.add_parser("experiment", help="Monte Carlo studies")
    p.add_argument("which", choices=sorted(_EXPERIMENTS))
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--instance", choices=("quadratic", "gaussian_var", "cvar"))
    p.add_argument("--n", type=int)
    p.add_argument("--n-samples", type=int)
    p.add_argument("--reps", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--kappa0", type=float)
    p.add_argument("--kappa1", type=float)
    p.add_argument("--eps", type=float)
    p.add_argument("--fixed-instance", action="store_const", const=True, default=None)
    p.add_argument("--improved-m2", action="store_const", const=True, default=None)
    p.add_argument("--workers", type=int)
    p.add_argument("--curve-n-min", type=int)
    p.add_argument("--curve-n-max", type=int)
    p.add_argument("--out", help="CSV output path (stdout when omitted)")
    p.add_argument("--plot", action="store_true",
                   help="render a PNG figure next to the CSV")
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("solve", help="one-off SAA solve with certificate")
    p.add_argument("--instance", default="cvar",
                   choices=("quadratic", "gaussian_var", "cvar"))
    p.add_argument("--instance-file", help="serialized instance description")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--n-samples", type=int, default=100)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--kappa0", type=float)
    p.add_argument("--kappa1", type=float)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--dump-lp", help="write the reformulated LP in text form")
    p.set_defaults(func=_cmd_solve)
    return top


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "seed", None) is None and hasattr(args, "seed"):
        args.seed = _default_seed()
    try:
        return args.func(args)
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return 130
    except (ValueError, KeyError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
