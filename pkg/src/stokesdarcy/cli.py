"""Command-line entry points.

Commands: train, evaluate, verify, list-problems, export.
Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O.
The environment variable CDNN_THREADS caps parallelism; setting it to 1
selects the reference deterministic mode (identical runs produce
bit-identical history files).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .config import load_config
from .errors import ConfigError, DomainError, NumericalError, UsageError
from .export import export_fields
from .figures import render_figures, render_history
from .metrics import error_report
from .network import init_params, load_checkpoint, save_checkpoint
from .problems import get_problem, list_problems
from .training import train
from .verification import forcing_consistency, gradient_check


def _threads() -> int:
    raw = os.environ.get("CDNN_THREADS")
    if raw is None:
        return 0
    try:
        n = int(raw)
    except ValueError as err:
        raise ConfigError(f"CDNN_THREADS must be an integer, got {raw!r}") from err
    if n < 1:
        raise ConfigError("CDNN_THREADS must be >= 1")
    return n


def cmd_train(args) -> int:
    _threads()
    cfg = load_config(args.config)
    outdir = args.out
    os.makedirs(outdir, exist_ok=True)
    ckpt_path = os.path.join(outdir, "checkpoint.json")

    def on_log(iteration, params, record):
        save_checkpoint(ckpt_path, params, seed=cfg.train.seed)

    params, history = train(cfg.problem, cfg.train, archs=cfg.archs, on_log=on_log)
    save_checkpoint(ckpt_path, params, seed=cfg.train.seed)
    hist_path = os.path.join(outdir, "history.csv")
    history.to_csv(hist_path)
    if not args.no_figures and history.records:
        render_history(history.iterations(), history.totals(),
                       os.path.join(outdir, "history.png"))

    if history.records:
        last = history.records[-1]
        print(f"problem {cfg.problem.name}: stopped at iteration {last.iteration}, "
              f"total loss {float(last.loss.total):.6e}, "
              f"grad norm {last.grad_norm:.6e}")
    print(f"wrote {hist_path} and {ckpt_path}")
    if history.error is not None:
        print(f"numerical failure: {history.error}", file=sys.stderr)
        return 3
    return 0


def cmd_evaluate(args) -> int:
    cfg = load_config(args.config)
    params, _ = load_checkpoint(args.checkpoint)
    report = error_report(params, cfg.problem, cfg.grid, cfg.interface_points)
    for line in report.lines():
        print(line)
    if args.json:
        payload = {"problem": cfg.problem.name,
                   "err_l1": report.err_l1, "err_l2": report.err_l2,
                   "interface_rms": list(report.interface_rms)}
        with open(args.json, "w") as fh:
            json.dump(payload, fh, indent=2)
        print(f"wrote {args.json}")
    return 0


def cmd_export(args) -> int:
    cfg = load_config(args.config)
    params, _ = load_checkpoint(args.checkpoint)
    data = export_fields(params, cfg.problem, cfg.grid, args.out)
    print(f"wrote {args.out}")
    if not args.no_figures:
        stem = args.out[:-4] if args.out.endswith(".csv") else args.out
        for path in render_figures(data, stem):
            print(f"wrote {path}")
    return 0


def cmd_verify(args) -> int:
    spec = get_problem(args.problem)
    failed = False

    if spec.exact is not None:
        residuals = forcing_consistency(spec)
        worst = max(residuals.values())
        ok = worst <= 1.0e-10
        failed |= not ok
        print(f"[{'PASS' if ok else 'FAIL'}] forcing consistency: "
              f"max residual of exact solution {worst:.3e} (tol 1e-10)")
        for name, val in sorted(residuals.items()):
            print(f"    {name}: {val:.3e}")
    else:
        print(f"[SKIP] forcing consistency: {args.problem} has no exact solution")

    max_rel, _ = gradient_check(spec)
    ok = max_rel <= 1.0e-5
    failed |= not ok
    print(f"[{'PASS' if ok else 'FAIL'}] adjoint vs finite differences: "
          f"max relative error {max_rel:.3e} (tol 1e-5)")
    return 3 if failed else 0


def cmd_list(args) -> int:
    for name, description in list_problems():
        print(f"{name}: {description}")
    print("custom: define geometry, constants, segments, and forcing inline "
          "in the config problem section")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stokesdarcy",
        description="meshfree neural solver for coupled free-flow / porous-medium problems")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train networks from a config file")
    p.add_argument("config")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="error report for a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("config")
    p.add_argument("--json", default=None, help="also write the report as JSON")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("export", help="export fields on the evaluation grid")
    p.add_argument("checkpoint")
    p.add_argument("config")
    p.add_argument("out", help="output CSV path")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("verify", help="run the self-check suites on a problem")
    p.add_argument("problem")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("list-problems", help="list registered problems")
    p.set_defaults(func=cmd_list)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, UsageError) as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 2
    except (NumericalError, DomainError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 3
    except OSError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
