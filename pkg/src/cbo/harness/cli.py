"""
Command line entry point.

Exit codes: 0 success, 1 usage or configuration error, 2 solver failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ..diagnostics import alpha_trend, check_concentration_conditions
from ..errors import SolverError
from ..particle import RngSpec
from .compare import compare_runs
from .config import ConfigError, load_config
from .experiment import ExperimentError, build_objective, initial_state, run_experiment, sweep_alpha
from .plotting import render_overlay, render_plots

__all__ = ["main", "build_parser"]

EXIT_OK, EXIT_USAGE, EXIT_SOLVER = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; 2 is reserved for solver failures
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, "%s: error: %s\n" % (self.prog, message))


def _alphas(text):
    try:
        values = [float(a) for a in text.split(",") if a.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("expected a comma-separated list of numbers, got %r" % text)
    if len(values) < 1 or any(not a > 0 for a in values):
        raise argparse.ArgumentTypeError("alphas must be positive")
    return values


def build_parser():
    parser = _Parser(prog="cbo", description="Consensus-based optimization experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="run an experiment described by a config file")
    p.add_argument("config", type=Path)
    p.add_argument("--out", type=Path, default=None, help="run directory (overrides out_dir)")

    p = sub.add_parser("plot", help="render SVG figures for a run directory")
    p.add_argument("run_dir", type=Path)

    p = sub.add_parser("compare", help="compare time-to-threshold and decay rates across runs")
    p.add_argument("run_dirs", type=Path, nargs="+")
    p.add_argument("--threshold", type=float, default=1e-2)
    p.add_argument("--out", type=Path, default=Path("comparison.csv"))

    p = sub.add_parser("check-conditions", help="print the concentration report of the initial law")
    p.add_argument("config", type=Path)

    p = sub.add_parser("sweep-alpha", help="run a config once per alpha and report the terminal distance")
    p.add_argument("config", type=Path)
    p.add_argument("--alphas", type=_alphas, required=True)
    p.add_argument("--out", type=Path, default=None)
    return parser


def _cmd_run(args):
    cfg = load_config(args.config)
    manifest = run_experiment(cfg, out_dir=args.out)
    print("run directory: %s" % manifest.out_dir)
    for rep in manifest.replicates:
        print("replicate %d: %s after %s steps" % (rep["index"], rep["terminated_by"], rep["steps"]))
    return EXIT_OK


def _cmd_plot(args):
    for path in render_plots(args.run_dir):
        print(path)
    return EXIT_OK


def _cmd_compare(args):
    rows = compare_runs(args.run_dirs, threshold=args.threshold, out=args.out)
    render_overlay(args.run_dirs, args.out.with_suffix(".svg"))
    for r in rows:
        hit = r["time_to_threshold"]
        hit = hit if isinstance(hit, str) else "%.4g" % hit
        print("%-40s %-14s t(<%g)=%-10s rate=%.4g r2=%.4f" % (r["run"], r["scheme"], args.threshold, hit, r["rate_hat"], r["r_squared"]))
    print("wrote %s" % args.out)
    return EXIT_OK


def _cmd_check(args):
    cfg = load_config(args.config)
    obj = build_objective(cfg)
    start = initial_state(cfg, RngSpec(cfg.seed, 0).generator())
    report = check_concentration_conditions(start, obj, cfg.lam, cfg.sigma, cfg.alpha)
    sys.stdout.write(report.to_text())
    return EXIT_OK


def _cmd_sweep(args):
    cfg = load_config(args.config)
    alphas = sorted(args.alphas)
    rows = sweep_alpha(cfg, alphas, out_dir=args.out)
    for r in rows:
        print("alpha=%-8g distance=%.6g laplace_gap=%.6g" % (r["alpha"], r["distance"], r["laplace_gap_initial"]))
    if len(rows) >= 2:
        verdict = alpha_trend([r["alpha"] for r in rows], [r["distance"] for r in rows])
        print("distance nonincreasing in alpha (10%% slack): %s (worst ratio %.4g)" % (verdict.status, verdict.worst))
    return EXIT_OK


_COMMANDS = {
    "run": _cmd_run,
    "plot": _cmd_plot,
    "compare": _cmd_compare,
    "check-conditions": _cmd_check,
    "sweep-alpha": _cmd_sweep,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ExperimentError, SolverError) as exc:
        print("solver failure: %s" % exc, file=sys.stderr)
        return EXIT_SOLVER
    except (ConfigError, ValueError, FileNotFoundError, OSError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
