"""Command line front end.

``levyem run <config.json>`` executes one experiment described by a JSON
config and persists results to a run directory; ``levyem list`` prints the
built-in experiment catalog.  Exit codes: 0 success, 2 unreadable or
unparseable config, 3 precondition violation, 4 simulation failure.

The output directory is resolved in order of precedence: ``--out`` flag,
``LEVYEM_OUT`` environment variable, ``output_dir`` config field, then
``levyem-runs/<config-stem>``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .errors import ConfigurationError, StepFailureError
from .experiments import (
    ConvergenceResult,
    MeasureResult,
    ProbeResult,
    SamplerResult,
    catalog,
    execute_config,
    write_run,
)

OUT_ENV_VAR = "LEVYEM_OUT"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="levyem",
        description="Semi-implicit Euler-Maruyama experiments for SDEs with jumps.",
        epilog=f"The {OUT_ENV_VAR} environment variable overrides the default output directory.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute one experiment config")
    run.add_argument("config", help="path to a JSON experiment config")
    run.add_argument("--paths", type=int, default=None, metavar="N",
                     help="override the number of Monte Carlo paths")
    run.add_argument("--seed", type=int, default=None, metavar="S",
                     help="override the master seed")
    run.add_argument("--workers", type=int, default=None, metavar="W",
                     help="worker processes (default: available parallelism)")
    run.add_argument("--out", default=None, metavar="DIR",
                     help="output directory for this run")

    sub.add_parser("list", help="print the built-in experiment catalog")
    return parser


def _resolve_out_dir(flag_value, cfg: dict, config_path: Path) -> Path:
    if flag_value:
        return Path(flag_value)
    env = os.environ.get(OUT_ENV_VAR)
    if env:
        return Path(env) / config_path.stem
    if cfg.get("output_dir"):
        return Path(cfg["output_dir"])
    return Path("levyem-runs") / config_path.stem


def _print_result(result) -> None:
    if isinstance(result, ConvergenceResult):
        print(f"problem: {result.problem}")
        for row in result.table.rows:
            print(f"  dt = {row.dt:<12g} rmse = {row.rmse:.6e}  (mse stderr {row.stderr:.2e})")
        lo, hi = result.fit.slope_ci
        print(f"fitted order: {result.fit.slope:.4f}  (95% CI [{lo:.4f}, {hi:.4f}], "
              f"r^2 = {result.fit.r_squared:.4f})")
        print(f"predicted order: {result.predicted:.4f}")
        if result.band is not None:
            verdict = "inside" if result.in_band else "OUTSIDE"
            print(f"band [{result.band[0]:g}, {result.band[1]:g}]: {verdict}")
    elif isinstance(result, MeasureResult):
        print(f"problem: {result.problem}  (reference: {result.reference})")
        for row in result.report.rows:
            print(f"  t = {row.t:<6g} KS = {row.ks:.4f} (p = {row.p_value:.3g})  "
                  f"W{result.report.k:g} = {row.wasserstein:.4f}")
        print(f"KS decreasing: {result.report.ks_decreasing}; "
              f"W decreasing: {result.report.wasserstein_decreasing}")
        if result.ratio is not None:
            print(f"Wasserstein ratio: {result.ratio:.4f}")
        if result.in_band is not None:
            print(f"band verdict: {'inside' if result.in_band else 'OUTSIDE'}")
    elif isinstance(result, ProbeResult):
        print(f"problem: {result.problem}")
        for probe in result.probes:
            status = "ok" if probe.violations == 0 else f"{probe.violations} violations"
            print(f"  probe {probe.probe:<12s} max_ratio = {probe.max_ratio:+.4f}  {status}")
        print(f"moment conditions: {'ok' if result.moment_report.passed else 'FAILED'}")
        print(f"all probes pass: {result.all_pass}")
    elif isinstance(result, SamplerResult):
        print(f"characteristic-function agreement: max |z| = {result.max_z:.2f} "
              f"over {len(result.rows)} (t, u) pairs")


def _cmd_run(args) -> int:
    config_path = Path(args.config)
    if not config_path.is_file():
        print(f"error: config file not found: {config_path}", file=sys.stderr)
        return 2
    try:
        cfg = json.loads(config_path.read_text())
    except json.JSONDecodeError as exc:
        print(f"error: {config_path}:{exc.lineno}:{exc.colno}: {exc.msg}", file=sys.stderr)
        return 2

    workers = args.workers if args.workers is not None else max(1, os.cpu_count() or 1)
    try:
        result = execute_config(
            cfg, n_paths=args.paths, master_seed=args.seed, workers=workers
        )
    except ConfigurationError as exc:
        print(f"error: precondition violated: {exc}", file=sys.stderr)
        return 3
    except StepFailureError as exc:
        print(f"error: simulation failed: {exc}", file=sys.stderr)
        return 4

    out_dir = _resolve_out_dir(args.out, cfg, config_path)
    try:
        write_run(result, out_dir)
    except OSError as exc:
        print(f"error: cannot write {out_dir}: {exc}", file=sys.stderr)
        return 3
    _print_result(result)
    print(f"wrote {out_dir}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list":
        for entry in catalog().values():
            print(entry.describe())
        return 0
    return _cmd_run(args)


if __name__ == "__main__":
    sys.exit(main())
