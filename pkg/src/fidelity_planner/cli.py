"""Command-line front end: ``fidelity-planner <command> [flags]``."""

import argparse
import json
import math
import sys

import numpy as np

from . import __version__
from .allocation import (Baseline, BudgetSpec, baseline_plan, benefit_ratio,
                         plan, rho_squared_from_corr, threshold_correlation)
from .exceptions import FidelityPlannerError
from .gp import Fidelity
from .harness import (ExperimentConfig, SyntheticSpec, generate_nested_design,
                      run_baseline_comparison, run_share_sweep)
from .io import (fmt, manifest, read_dataset, read_manifest, write_manifest,
                 write_points, write_table)
from .minimax import FidelitySmoothness, SmoothnessClass, minimax_error_single, minimax_error_vf
from .spectral import (GridSpec, SpectralDensity, exponential_error_closed,
                       exponential_error_taylor, interpolation_error, sqexp_error_bounds)

CORR_CLAMP = 1e-6
RESULT_HEADER = ["share", "n_high", "n_low", "rrms_mean", "rrms_std", "replications",
                 "method", "flag"]
DENSITY_NAMES = {"exp": "exponential", "exponential": "exponential", "sqexp": "sqexp",
                 "matern32": "matern32"}


class UsageError(Exception):
    pass


def parse_grid(text):
    """``"a:b:n"`` for ``n`` evenly spaced values, or a comma-separated list."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise argparse.ArgumentTypeError(f"bad grid {text!r}; use start:stop:num")
        a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
        if n < 1:
            raise argparse.ArgumentTypeError("grid needs at least one point")
        return [float(v) for v in np.round(np.linspace(a, b, n), 12)]
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}") from None


def _check_corr(r):
    if not CORR_CLAMP < abs(r) < 1 - CORR_CLAMP:
        raise UsageError(
            f"--corr {r} rejected: correlations are clamped to ({CORR_CLAMP:g}, "
            f"{1 - CORR_CLAMP:g}) and must lie strictly inside (0, 1)")
    return abs(r)


def _budget(args):
    try:
        return BudgetSpec(args.budget, args.cost)
    except ValueError as exc:
        raise UsageError(f"{exc} (got --budget {args.budget}, --cost {args.cost})") from None


def _seed(args):
    if args.seed is None:
        args.seed = 0
        print("seed: 0 (default)", file=sys.stderr)
    return args.seed


def _params(args):
    skip = {"func", "command", "out"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _emit_table(args, header, rows, command):
    if args.out:
        write_table(args.out, header, rows)
        write_manifest(args.out + ".manifest.json",
                       manifest(command, _params(args), args.seed, __version__))
    else:
        write_table(sys.stdout, header, rows)


# commands

def cmd_plan(args):
    spec = _budget(args)
    if args.baseline and args.baseline != Baseline.MIN_MINIMAX.value:
        result = baseline_plan(args.baseline, spec)
    else:
        if args.corr is None:
            raise UsageError("--corr is required for the MinMinimax plan")
        r = _check_corr(args.corr)
        nested = args.nested or bool(args.emit_designs)
        result = plan(r, spec, args.dim, args.min_high, nested=nested)
    print(json.dumps(result.to_dict(), sort_keys=True))
    if args.emit_designs:
        seed = _seed(args)
        D_low, D_high = generate_nested_design(result.n_low, result.n_high, args.dim, seed)
        write_points(args.emit_designs + "_low.csv", D_low)
        write_points(args.emit_designs + "_high.csv", D_high)
    return 0


def cmd_tradeoff(args):
    costs = args.cost_grid if args.cost_grid else [args.cost]
    if any(c is None or c <= 1 for c in costs):
        raise UsageError("costs must exceed 1")
    rows = []
    if args.k is not None:
        if not 0 < args.k <= 1:
            raise UsageError("--k must lie in (0, 1]")
        base = FidelitySmoothness(args.lf, args.lg, 1.0)
        header = ["c", "r_threshold"]
        for c in costs:
            rows.append([c, threshold_correlation(base, c, args.dim, args.k)])
    else:
        header = ["r", "ratio"] if len(costs) == 1 else ["c", "r", "ratio"]
        for c in costs:
            for r in args.r_grid:
                if not 0 < r < 1:
                    raise UsageError(f"r-grid value {r} outside (0, 1)")
                fs = FidelitySmoothness(args.lf, args.lg, math.sqrt(rho_squared_from_corr(r)))
                val = benefit_ratio(fs, c, args.dim)
                rows.append([r, val] if len(costs) == 1 else [c, r, val])
    args.seed = None
    if args.out:
        write_table(args.out, header, rows)
    else:
        write_table(sys.stdout, header, rows)
    return 0


def error_value(args):
    """Evaluate the error requested by ``cmd_error``; returns (label, value)."""
    if args.minimax:
        lam = args.lam or [1.0] * len(args.h)
        cls = SmoothnessClass(args.L, tuple(lam))
        return "formula", minimax_error_single(cls, GridSpec(tuple(args.h)))
    if args.vf:
        fs = FidelitySmoothness(args.lf, args.lg, args.rho)
        return "formula", minimax_error_vf(fs, args.h[0], args.m, args.dim)
    if args.density is None:
        raise UsageError("choose --density, --minimax or --vf")
    family = DENSITY_NAMES[args.density]
    theta = tuple(args.theta)
    if len(args.h) != len(theta):
        if len(theta) == 1:
            theta = theta * len(args.h)
        else:
            raise UsageError("--theta and --h differ in length")
    method = args.method
    if method in ("closed", "taylor"):
        if family != "exponential" or len(theta) != 1:
            raise UsageError(f"--method {method} needs a 1-d exponential density")
        f = exponential_error_closed if method == "closed" else exponential_error_taylor
        return method, f(theta[0], args.h[0])
    if method == "bounds":
        if family != "sqexp" or len(theta) != 1:
            raise UsageError("--method bounds needs a 1-d sqexp density")
        b = sqexp_error_bounds(theta[0], args.h[0])
        return "bounds", (b.lower, b.upper)
    density = SpectralDensity(family, theta)
    how = "direct" if method == "direct" else "folded"
    return "quadrature", interpolation_error(density, GridSpec(tuple(args.h)), method=how)


def cmd_error(args):
    label, value = error_value(args)
    if isinstance(value, tuple):
        print(f"{label}\t{fmt(value[0])}\t{fmt(value[1])}")
    else:
        print(f"{label}\t{fmt(value)}")
    return 0


def _synthetic(args):
    r = _check_corr(args.corr)
    spec = SyntheticSpec.from_correlation(args.dim, r, args.theta_f, args.theta_g,
                                          seed=args.seed)
    config = ExperimentConfig(budget=args.budget, cost_high=args.cost, replications=args.reps,
                              share_grid=tuple(args.shares), test_size=args.test_size,
                              min_high=args.min_high, seed=args.seed)
    return spec, config


def cmd_simulate(args):
    _budget(args)
    _seed(args)
    spec, config = _synthetic(args)
    results = run_share_sweep(spec, config)
    _emit_table(args, RESULT_HEADER, [_row(r) for r in results], "simulate")
    return 1 if any(r.flag for r in results) else 0


def _row(r):
    return [r.share, r.n_high, r.n_low, r.rrms_mean, r.rrms_std, r.replications, r.method, r.flag]


def cmd_benchmark(args):
    _budget(args)
    _seed(args)
    low = read_dataset(args.low, Fidelity.LOW)
    high = read_dataset(args.high, Fidelity.HIGH)
    r_est = None if args.corr is None else _check_corr(args.corr)
    config = ExperimentConfig(budget=args.budget, cost_high=args.cost, replications=args.reps,
                              folds=args.folds, min_high=args.min_high, seed=args.seed)
    results = run_baseline_comparison(low, high, config, r_est)
    _emit_table(args, RESULT_HEADER, [_row(r) for r in results], "benchmark")
    return 1 if any(r.flag for r in results) else 0


def cmd_replay(args):
    data = read_manifest(args.manifest)
    commands = {"simulate": cmd_simulate, "benchmark": cmd_benchmark}
    if data["command"] not in commands:
        raise UsageError(f"cannot replay command {data['command']!r}")
    sub = argparse.Namespace(**data["parameters"])
    sub.command, sub.out = data["command"], args.out
    sub.seed = data["master_seed"]
    return commands[sub.command](sub)


def build_parser():
    p = argparse.ArgumentParser(prog="fidelity-planner",
                                description="Variable-fidelity design planning and evaluation")
    p.add_argument("--version", action="version", version=__version__)
    sp = p.add_subparsers(dest="command", required=True)

    q = sp.add_parser("plan", help="optimal sample sizes for a budget")
    q.add_argument("--budget", type=float, required=True)
    q.add_argument("--cost", type=float, required=True)
    q.add_argument("--corr", type=float)
    q.add_argument("--dim", type=int, default=1)
    q.add_argument("--min-high", type=int, default=5)
    q.add_argument("--baseline", choices=[b.value for b in Baseline])
    q.add_argument("--nested", action="store_true",
                   help="keep n_low >= n_high so the designs can be nested")
    q.add_argument("--emit-designs", metavar="PREFIX",
                   help="write PREFIX_low.csv and PREFIX_high.csv")
    q.add_argument("--seed", type=int)
    q.set_defaults(func=cmd_plan)

    q = sp.add_parser("tradeoff", help="R2/R1 curves and threshold correlations")
    q.add_argument("--lf", type=float, default=1.0)
    q.add_argument("--lg", type=float, default=1.0)
    q.add_argument("--cost", type=float)
    q.add_argument("--cost-grid", type=parse_grid)
    q.add_argument("--dim", type=int, default=1)
    q.add_argument("--r-grid", type=parse_grid, default=parse_grid("0.01:0.99:99"))
    q.add_argument("--k", type=float, help="emit threshold curve R2 = k R1")
    q.add_argument("--out")
    q.set_defaults(func=cmd_tradeoff)

    q = sp.add_parser("error", help="interpolation and minimax errors")
    q.add_argument("--density", choices=sorted(DENSITY_NAMES))
    q.add_argument("--theta", type=float, nargs="+", default=[1.0])
    q.add_argument("--h", type=float, nargs="+", default=[1.0])
    q.add_argument("--method", choices=["quadrature", "direct", "closed", "taylor", "bounds"],
                   default="quadrature")
    q.add_argument("--minimax", action="store_true")
    q.add_argument("--L", type=float, default=1.0)
    q.add_argument("--lambda", dest="lam", type=float, nargs="+")
    q.add_argument("--vf", action="store_true")
    q.add_argument("--lf", type=float, default=1.0)
    q.add_argument("--lg", type=float, default=1.0)
    q.add_argument("--rho", type=float, default=1.0)
    q.add_argument("--m", type=int, default=1)
    q.add_argument("--dim", type=int, default=1)
    q.set_defaults(func=cmd_error)

    q = sp.add_parser("simulate", help="synthetic share sweep")
    q.add_argument("--dim", type=int, default=3)
    q.add_argument("--cost", type=float, default=5.0)
    q.add_argument("--corr", type=float, default=0.9)
    q.add_argument("--budget", type=float, default=300.0)
    q.add_argument("--reps", type=int, default=20)
    q.add_argument("--shares", type=parse_grid, default=parse_grid("0:1:11"))
    q.add_argument("--theta-f", type=float, default=2.0)
    q.add_argument("--theta-g", type=float, default=2.0)
    q.add_argument("--test-size", type=int, default=200)
    q.add_argument("--min-high", type=int, default=5)
    q.add_argument("--seed", type=int)
    q.add_argument("--out")
    q.set_defaults(func=cmd_simulate)

    q = sp.add_parser("benchmark", help="cross-validated baseline comparison on CSV data")
    q.add_argument("--low", required=True)
    q.add_argument("--high", required=True)
    q.add_argument("--budget", type=float, required=True)
    q.add_argument("--cost", type=float, required=True)
    q.add_argument("--reps", type=int, default=20)
    q.add_argument("--folds", type=int, default=5)
    q.add_argument("--corr", type=float, help="known correlation; estimated when absent")
    q.add_argument("--min-high", type=int, default=5)
    q.add_argument("--seed", type=int)
    q.add_argument("--out")
    q.set_defaults(func=cmd_benchmark)

    q = sp.add_parser("replay", help="re-run the command recorded in a manifest")
    q.add_argument("manifest")
    q.add_argument("--out")
    q.set_defaults(func=cmd_replay)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FidelityPlannerError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
