"""The ``dipolesim`` command.

Subcommands: ``simulate``, ``collapse``, ``lindblad``, ``tilt-test``,
``calibrate``.  Common flags: ``--config PATH``, ``--set key=value``
(repeatable, dotted paths), ``--seed N``, ``--workers N``, ``--out DIR``,
``--format {csv,json}``.

Environment: ``DIPOLESIM_OUT`` overrides the output directory and
``DIPOLESIM_WORKERS`` the worker count when the flags are absent; flags
take precedence over the environment, which takes precedence over the
config file.

Exit codes: 0 success, 1 failed internal check, 2 configuration error,
3 numeric divergence.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .config import ConfigError, load_config, parse_config
from .integrate import DivergenceError
from .runner import calibrate_report, collapse_report, lindblad_report, simulate, tilt_report

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG_ERROR = 2
EXIT_DIVERGED = 3

OUT_ENV = "DIPOLESIM_OUT"
WORKERS_ENV = "DIPOLESIM_WORKERS"


def _add_common(p: argparse.ArgumentParser, needs_config: bool):
    p.add_argument("--config", type=str, default=None, required=needs_config, help="config file (YAML or JSON)")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE", help="override a config value (dotted path, repeatable)")
    p.add_argument("--seed", type=int, default=None, help="override the master seed")
    p.add_argument("--workers", type=int, default=None, help="worker processes (default: env or all cores)")
    p.add_argument("--out", type=str, default=None, help="output directory override")
    p.add_argument("--format", choices=("csv", "json"), default=None, help="table format override")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dipolesim", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p_sim = sub.add_parser("simulate", help="run the configured ensembles and write tables")
    _add_common(p_sim, needs_config=True)
    p_col = sub.add_parser("collapse", help="pinned residuals and optimized data collapse")
    _add_common(p_col, needs_config=True)
    p_col.add_argument("--results", type=str, default=None, help="existing roughness table to analyze")
    p_lin = sub.add_parser("lindblad", help="exact spin-model symmetry battery")
    _add_common(p_lin, needs_config=False)
    p_tilt = sub.add_parser("tilt-test", help="discrete tilt-identity residuals")
    _add_common(p_tilt, needs_config=False)
    p_cal = sub.add_parser("calibrate", help="linear variants against exact oracles")
    _add_common(p_cal, needs_config=False)
    return parser


def _resolve_workers(args) -> int:
    if args.workers is not None:
        return max(1, args.workers)
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _resolve_out(args, cfg=None):
    if args.out:
        return Path(args.out)
    env = os.environ.get(OUT_ENV)
    if env:
        return Path(env)
    if cfg is not None:
        return Path(cfg.resolved["output"]["directory"])
    return Path("out")


def _load(args):
    if args.config is None:
        cfg = parse_config({"equation": {"variant": "dipole_growth"}})
    else:
        cfg = load_config(args.config, args.overrides)
    if args.seed is not None:
        cfg.resolved["ensemble"]["master_seed"] = int(args.seed)
    if args.format is not None:
        cfg.resolved["output"]["formats"] = [args.format]
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            cfg = _load(args)
            report = simulate(cfg, workers=_resolve_workers(args), out_dir=_resolve_out(args, cfg))
            print(f"wrote {len(report['files'])} files to {report['out_dir']}")
            return EXIT_OK
        if args.command == "collapse":
            cfg = _load(args)
            report = collapse_report(
                cfg,
                roughness_path=args.results,
                workers=_resolve_workers(args),
                out_dir=_resolve_out(args, cfg),
            )
            print(json.dumps({k: report[k] for k in ("chi", "z", "residual", "pinned_residuals")}, indent=1))
            if report["boundary_suspect"]:
                print("warning: optimum pinned to a search boundary", file=sys.stderr)
            return EXIT_OK
        if args.command == "lindblad":
            report = lindblad_report(out_dir=_resolve_out(args))
            _print_checks(report)
            return EXIT_OK if report["passed"] else EXIT_CHECK_FAILED
        if args.command == "tilt-test":
            report = tilt_report(out_dir=_resolve_out(args))
            print(
                f"tilt identity: max residual {report['max_identity_residual']:.3e}, "
                f"g=0 control residual {report['g0_control_residual']:.3e}"
            )
            return EXIT_OK if report["passed"] else EXIT_CHECK_FAILED
        if args.command == "calibrate":
            report = calibrate_report(workers=_resolve_workers(args), out_dir=_resolve_out(args))
            for name, entry in report["variants"].items():
                print(
                    f"{name}: chi={entry['chi']:.3f} beta={entry['beta']:.3f} "
                    f"oracle<=3sigma={entry['oracle_within_3_stderr']} passed={entry['passed']}"
                )
            return EXIT_OK if report["passed"] else EXIT_CHECK_FAILED
        raise AssertionError(args.command)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except DivergenceError as exc:
        print(f"numeric divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


def _print_checks(report):
    for section, checks in report["checks"].items():
        for c in checks:
            status = "PASS" if c["passed"] else "FAIL"
            print(f"[{status}] {section}: {c['name']} (measured {c['measured']:.3e}, tol {c['tolerance']:g})")


if __name__ == "__main__":
    sys.exit(main())
