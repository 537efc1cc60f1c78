"""Command-line front end: run / calibrate / estimate / report.

Thin flag parsing over the harness functions.  Exit codes: 0 success,
2 for validation errors (bad flags, configs, archives), 3 for solver
aborts mid-run.
"""

import argparse
import sys

import numpy as np

from .config import build_run, load_config
from .errors import SolverAbort, ValidationError
from .harness import calibrate_archive, estimate, merge_reports, sweep

_MODEL_FLAGS = {
    "vpl": "VPL", "vpfp": "VPFP", "ep": "EP",
    "hom-landau": "HOM_LANDAU", "hom-fp": "HOM_FP",
}


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="kinuq",
        description="Kinetic-plasma sample sweeps and variance-reduced estimation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a model over parameter draws")
    p_run.add_argument("--model", required=True, choices=sorted(_MODEL_FLAGS))
    p_run.add_argument("--ic", required=True, help="initial-condition id")
    p_run.add_argument("--config", help="TOML config file")
    p_run.add_argument("--samples", type=int, default=None)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--out", required=True, help="archive directory")
    p_run.add_argument("--mean-of", type=int, default=None, metavar="L",
                       help="also write a control-variate mean over L draws")
    p_run.add_argument("--epsilon", type=float, default=None)
    p_run.add_argument("--mu", type=float, default=None)
    p_run.add_argument("--t-final", type=float, default=None)

    p_cal = sub.add_parser("calibrate", help="fit collision frequency to an archive")
    p_cal.add_argument("--dataset", required=True, help="archive with f snapshots")
    p_cal.add_argument("--mu-grid", default=None,
                       help="comma list of mu candidates, e.g. 0.5,1,2")
    p_cal.add_argument("--norm", default="L1", choices=["L1", "Linf"])
    p_cal.add_argument("--out", required=True, help="CSV path for the error curve")

    p_est = sub.add_parser("estimate", help="variance-reduced estimate from archives")
    p_est.add_argument("--high", required=True, help="high-fidelity archive")
    p_est.add_argument("--low", action="append", required=True,
                       help="surrogate archive (repeatable)")
    p_est.add_argument("--mode", choices=["pointwise", "global"], default=None)
    p_est.add_argument("--reference", default=None,
                       help="dense reference archive for L1-error tables")
    p_est.add_argument("--quantity", default="f")
    p_est.add_argument("--out", required=True, help="report directory")

    p_rep = sub.add_parser("report", help="merge estimate reports to one table")
    p_rep.add_argument("--inputs", nargs="+", required=True)
    p_rep.add_argument("--out", required=True, help="merged CSV path")
    return parser


def _cmd_run(args):
    cfg = load_config(args.config) if args.config else {}
    overrides = {}
    if args.epsilon is not None:
        overrides["epsilon"] = args.epsilon
    if args.mu is not None:
        overrides["mu"] = args.mu
    if args.t_final is not None:
        overrides["t_final"] = args.t_final
    run = build_run(cfg, model=_MODEL_FLAGS[args.model], ic_id=args.ic,
                    overrides=overrides)
    # explicit flags beat the config; the config beats built-in defaults
    run_tab = cfg.get("run", {})
    samples = args.samples if args.samples is not None else run_tab.get("samples", 1)
    seed = args.seed if args.seed is not None else run_tab.get("seed", 0)
    mean_of = args.mean_of if args.mean_of is not None else run_tab.get("mean_draws")
    archive = sweep(run, samples, seed, args.out, mean_draws=mean_of)
    print(f"wrote {archive.n_samples} samples to {archive.root}")


def _cmd_calibrate(args):
    mu_grid = None
    if args.mu_grid:
        mu_grid = np.array([float(tok) for tok in args.mu_grid.split(",")])
    mu_star, curve, grid = calibrate_archive(
        args.dataset, mu_grid=mu_grid, norm=args.norm, out_path=args.out)
    print(f"mu* = {mu_star:.6g} (1/mu = {1.0 / mu_star:.6g}); "
          f"curve written to {args.out}")


def _cmd_estimate(args):
    report = estimate(args.high, args.low, args.out, mode=args.mode,
                      reference=args.reference, quantity=args.quantity)
    print(f"estimated {len(report['rows'])} output times "
          f"({report['mode']} weights) into {args.out}")


def _cmd_report(args):
    rows = merge_reports(args.inputs, args.out)
    print(f"merged {len(rows)} rows into {args.out}")


def main(argv=None):
    args = _build_parser().parse_args(argv)
    handler = {"run": _cmd_run, "calibrate": _cmd_calibrate,
               "estimate": _cmd_estimate, "report": _cmd_report}[args.command]
    try:
        handler(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SolverAbort as exc:
        print(f"solver abort: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
