"""
Command-line entry point `retri-schedules` with the subcommands run, sweep,
heatmap, compare and verify.

Exit status is 0 on success, 2 for configuration or input errors and 3 when a
delivery or invariant check fails.
"""

from __future__ import annotations

import argparse
import logging
import sys

import pandas as pd

from . import __version__
from .experiments import (
    SWEEP_COLUMNS,
    ConfigError,
    GridMismatchError,
    emit_comparison,
    emit_heatmap,
    format_bytes,
    format_duration,
    load_config,
    render_comparison_text,
    render_heatmap_text,
    run_comparison,
    run_single,
    run_sweep,
    sweep_csv,
    verify_invariants,
    write_comparison,
    write_heatmap,
    write_sweep,
)
from .propagation import dump_trace, trace_frame

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VERIFY = 3


def _verbosity_parser():
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument(
        "-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG logging."
    )
    return parser


def _config_parser():
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument(
        "--config",
        default=None,
        help="Experiment config file or bundled grid name (default: evaluation_grid).",
    )
    parser.add_argument("--algo", default=None, help="retri, bruck or direct.")
    parser.add_argument("--n", default=None, help="Ring size.")
    parser.add_argument("--msg-bytes", default=None, help="Comma-separated message sizes, e.g. 1KB,256MB.")
    parser.add_argument("--delta", default=None, help="Comma-separated reconfiguration delays, e.g. 1us,50ms.")
    parser.add_argument("--reconfigs", default=None, help="'auto' or a fixed reconfiguration count.")
    parser.add_argument("--baseline", default=None, help="ALGO:N[:RECONFIGS] or 'none'.")
    parser.add_argument(
        "--compare", default=None, help="Comma-separated baselines for compare, e.g. bruck:8,direct:8."
    )
    parser.add_argument(
        "--normalize", action="store_true", help="Normalize totals by ring size before speedups."
    )
    parser.add_argument("--out", default=None, help="Output CSV path.")
    return parser


def build_parser():
    verbosity, config = _verbosity_parser(), _config_parser()
    parser = argparse.ArgumentParser(
        prog="retri-schedules",
        description="All-to-All schedules and cost models for reconfigurable optical rings.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[verbosity, config], help="Run one (message size, delta) cell.")
    run.add_argument("--export-schedule", default=None, metavar="PATH", help="Write the generated schedule.")
    run.add_argument("--trace", default=None, metavar="PATH", help="Write the per-phase trace CSV.")

    sweep = sub.add_parser("sweep", parents=[verbosity, config], help="Evaluate the whole grid.")
    sweep.add_argument("--jobs", type=int, default=1, help="Worker processes.")

    heatmap = sub.add_parser(
        "heatmap", parents=[verbosity], help="Speedup matrix from a candidate and baseline sweep CSVs."
    )
    heatmap.add_argument("sweep", help="Sweep CSV of the candidate.")
    heatmap.add_argument(
        "baselines", nargs="+", help="Sweep CSVs of the baselines; more than one marks the stronger per cell."
    )
    heatmap.add_argument("--normalize", action="store_true", help="Normalize totals by ring size first.")
    heatmap.add_argument("--out", default=None, help="Heatmap matrix CSV; R goes to <stem>_R<suffix>.")
    heatmap.add_argument("--plot", default=None, metavar="PATH", help="Render an image (needs the plot extra).")

    compare = sub.add_parser(
        "compare", parents=[verbosity, config], help="Sweep the candidate and every compare baseline."
    )
    compare.add_argument("--jobs", type=int, default=1, help="Worker processes.")
    compare.add_argument("--plot", default=None, metavar="PATH", help="Render an image (needs the plot extra).")

    sub.add_parser("verify", parents=[verbosity, config], help="Delivery and invariant checks.")
    return parser


def _overrides(args):
    return {
        "algorithm": args.algo,
        "n": args.n,
        "message_bytes": args.msg_bytes,
        "delta": args.delta,
        "reconfigs": args.reconfigs,
        "baseline": args.baseline,
        "compare": args.compare,
        "normalize_per_node": "true" if args.normalize else None,
    }


def _print_report(report):
    padded = f" (requested {report.n_requested}, padded)" if report.padded else ""
    if report.crosscheck_error is None:
        crosscheck = "skipped"
    else:
        crosscheck = f"relative error {report.crosscheck_error:.3g}"
    if report.delivery.ok:
        delivery = "ok"
    else:
        delivery = f"FAILED ({len(report.delivery.misplaced)} misplaced)"
    lines = [
        f"algorithm: {report.algorithm.value}",
        f"n: {report.n}{padded}",
        f"message: {format_bytes(report.m)}  delta: {format_duration(report.params.delta)}",
        f"plan: {report.plan}  R: {report.R}" + ("  (model extrapolation)" if report.extrapolated else ""),
        f"closed-form total: {report.closed.total:.6e} s",
        f"simulated total:   {report.simulated.total:.6e} s",
        f"crosscheck: {crosscheck}",
        f"delivery: {delivery}",
    ]
    if report.speedup is not None:
        b = report.baseline
        lines.append(f"baseline: {b.algorithm.value} n={b.n} R={b.R} total {b.cost.total:.6e} s")
        lines.append(f"speedup: {report.speedup:.2f}")
    print("\n".join(lines))
    print(trace_frame(report.metrics).to_string(index=False))


def _run(args):
    config = load_config(args.config, _overrides(args))
    report = run_single(config, schedule_path=args.export_schedule)
    _print_report(report)
    if args.trace:
        dump_trace(report.metrics, args.trace)
    if args.out:
        write_sweep(pd.DataFrame([report.row()], columns=SWEEP_COLUMNS), config, args.out)
    return EXIT_OK if report.ok else EXIT_VERIFY


def _sweep(args):
    config = load_config(args.config, _overrides(args))
    frame = run_sweep(config, n_jobs=args.jobs)
    if args.out:
        write_sweep(frame, config, args.out)
    else:
        sys.stdout.write(sweep_csv(frame, config))
    return EXIT_OK


def _report_comparison(comparison, out, plot):
    if out:
        write_comparison(comparison, out)
    if plot:
        from .heatmap_plots import save_comparison_heatmap

        save_comparison_heatmap(comparison, plot)
    print(render_comparison_text(comparison))
    return EXIT_OK


def _heatmap(args):
    if len(args.baselines) > 1:
        comparison = emit_comparison(args.sweep, args.baselines, normalize_per_node=args.normalize)
        return _report_comparison(comparison, args.out, args.plot)
    speedups, reconfigs = emit_heatmap(args.sweep, args.baselines[0], normalize_per_node=args.normalize)
    if args.out:
        write_heatmap(speedups, reconfigs, args.out)
    if args.plot:
        from .heatmap_plots import save_speedup_heatmap

        save_speedup_heatmap(speedups, args.plot, reconfigs)
    print(render_heatmap_text(speedups, reconfigs))
    return EXIT_OK


def _compare(args):
    config = load_config(args.config, _overrides(args))
    return _report_comparison(run_comparison(config, n_jobs=args.jobs), args.out, args.plot)


def _verify(args):
    config = load_config(args.config, _overrides(args))
    checks = verify_invariants(config)
    print(checks.to_string(index=False))
    failed = checks[~checks["ok"]]
    if not failed.empty:
        logger.error("%d of %d checks failed", len(failed), len(checks))
        return EXIT_VERIFY
    return EXIT_OK


COMMANDS = {"run": _run, "sweep": _sweep, "heatmap": _heatmap, "compare": _compare, "verify": _verify}


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, GridMismatchError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
