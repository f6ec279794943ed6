"""Command-line interface.

Subcommands: sim (run a scenario file), analyze (small-signal response
tables), metrics (recompute from a log CSV), sweep (batch scenarios on a
worker pool). Exit codes: 0 success, 1 validation error, 2 divergence.
"""

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import analysis, plots, sim
from .errors import Diverged, EmptyLog, QuadtrackError, ScenarioError
from .scenario import load_scenario
from .vehicle import VehicleParams

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_DIVERGED = 2


def _write_table(path, header, table):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in table:
            fh.write(",".join(f"{v:.9g}" for v in row) + "\n")


def _run_one(scenario_path, seed, out_path, metrics_path):
    """Run one scenario file; returns (exit_code, message)."""
    try:
        scenario = load_scenario(scenario_path, seed_override=seed)
    except ScenarioError as e:
        return EXIT_INVALID, str(e)
    code = EXIT_OK
    note = ""
    try:
        log = sim.run_scenario(scenario)
    except Diverged as e:
        log = e.log
        code = EXIT_DIVERGED
        note = str(e)
    except ScenarioError as e:
        return EXIT_INVALID, str(e)
    sim.write_csv(log, out_path)
    try:
        report = sim.metrics(log, scenario.params.gravity)
    except EmptyLog as e:
        return EXIT_INVALID, f"{scenario_path}: {e}"
    lines = report.lines()
    if metrics_path:
        Path(metrics_path).write_text("\n".join(lines) + "\n")
    return code, note or "\n".join(lines)


def cmd_sim(args):
    out = args.out or (Path(args.scenario).stem + ".csv")
    metrics_out = args.metrics_out
    code, message = _run_one(args.scenario, args.seed, out, metrics_out)
    if code == EXIT_INVALID:
        print(message, file=sys.stderr)
        return code
    print(f"log written to {out}")
    print(message)
    if args.plot:
        try:
            written = plots.plot_log(sim.read_csv(out), out)
        except QuadtrackError as e:
            print(f"plotting failed: {e}", file=sys.stderr)
            return EXIT_INVALID
        for p in written:
            print(f"figure written to {p}")
    return code


def cmd_metrics(args):
    try:
        cols = sim.read_csv(args.log)
        report = sim.metrics_from_csv(cols, gravity=args.gravity)
    except (OSError, ValueError) as e:
        print(f"{args.log}: {e}", file=sys.stderr)
        return EXIT_INVALID
    except QuadtrackError as e:
        print(str(e), file=sys.stderr)
        return EXIT_INVALID
    print("\n".join(report.lines()))
    return EXIT_OK


_CASE_ALIASES = {
    "force-step": "force-step",
    "moment-step": "moment-step",
    "delta": "delta",
    "delta-sweep": "delta",
    "tracking": "tracking",
    "accref-tracking": "tracking",
}


def _analyze_table(args, params):
    case = _CASE_ALIASES[args.case]
    duration = args.duration
    dt = args.dt

    if case in ("force-step", "moment-step"):
        which = "position_from_force" if case == "force-step" \
            else "position_from_moment"
        duration = duration or 5.0
        rows = None
        header = ["t"]
        for incremental in (True, False):
            loop = analysis.build_linear_loop(
                params, model_scale=args.delta, incremental=incremental)
            t, y = analysis.step_response(getattr(loop, which), duration, dt)
            if rows is None:
                rows = [t]
            rows.append(y)
            header.append("incremental" if incremental
                          else "non_incremental")
        return header, np.column_stack(rows)

    if case == "delta":
        values = [float(v) for v in args.values.split(",")] if args.values \
            else [0.2, 0.5, 2.0, 5.0]
        duration = duration or 0.5
        header = ["t"]
        rows = None
        for value in values:
            loop = analysis.build_linear_loop(
                params, model_scale=value,
                incremental=not args.non_incremental)
            t, y = analysis.step_response(loop.actuation, duration, dt)
            if rows is None:
                rows = [t]
            rows.append(y)
            header.append(f"delta_{value:g}")
        return header, np.column_stack(rows)

    duration = duration or 6.0
    loops = {
        "with_ff": analysis.build_linear_loop(
            params, model_scale=args.delta, feedforward=True),
        "without_ff": analysis.build_linear_loop(
            params, model_scale=args.delta, feedforward=False),
    }
    header = ["t", "reference"]
    n = int(round(duration / dt))
    t = np.arange(n + 1) * dt
    rows = [t, analysis.tanh_accel_reference(t)]
    for name, loop in loops.items():
        rows.append(analysis.driven_response(loop.accel_tracking, t,
                                             rows[1]))
        header.append(name)
    return header, np.column_stack(rows)


def cmd_analyze(args):
    if args.case not in _CASE_ALIASES:
        print(f"unknown case '{args.case}' (expected one of "
              f"{', '.join(sorted(set(_CASE_ALIASES)))})", file=sys.stderr)
        return EXIT_INVALID
    params = VehicleParams()
    try:
        header, table = _analyze_table(args, params)
    except (QuadtrackError, ValueError) as e:
        print(str(e), file=sys.stderr)
        return EXIT_INVALID
    _write_table(args.out, header, table)
    print(f"table written to {args.out}")
    if args.plot:
        for p in plots.plot_table(header, table, args.out,
                                  title=_CASE_ALIASES[args.case]):
            print(f"figure written to {p}")
    return EXIT_OK


def _sweep_worker(job):
    return _run_one(*job)


def cmd_sweep(args):
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = []
    for scenario_path in args.scenarios:
        stem = Path(scenario_path).stem
        jobs.append((scenario_path, args.seed, out_dir / f"{stem}.csv",
                     out_dir / f"{stem}.metrics.txt"))

    workers = args.jobs or int(os.environ.get("THREADS", "0")) \
        or os.cpu_count() or 1
    workers = min(workers, len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_worker, jobs))
    else:
        results = [_sweep_worker(job) for job in jobs]

    worst = EXIT_OK
    for (scenario_path, _, out_path, _), (code, message) in zip(jobs,
                                                                results):
        status = {EXIT_OK: "ok", EXIT_INVALID: "invalid",
                  EXIT_DIVERGED: "diverged"}[code]
        print(f"{scenario_path}: {status} -> {out_path}")
        if code == EXIT_INVALID:
            print(f"  {message}", file=sys.stderr)
            worst = EXIT_INVALID
        elif code == EXIT_DIVERGED and worst != EXIT_INVALID:
            worst = EXIT_DIVERGED
    return worst


def build_parser():
    parser = argparse.ArgumentParser(
        prog="quadtrack",
        description="Quadrotor flight simulator and trajectory-tracking "
                    "controller harness.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sim", help="run a scenario file")
    p.add_argument("--scenario", required=True, help="scenario config file")
    p.add_argument("--seed", type=int, default=None,
                   help="override the scenario's RNG seed")
    p.add_argument("--out", default=None, help="log CSV path")
    p.add_argument("--metrics-out", default=None,
                   help="also write the metrics summary to this file")
    p.add_argument("--plot", action="store_true",
                   help="render an overview PNG next to the log")
    p.set_defaults(func=cmd_sim)

    p = sub.add_parser("analyze", help="small-signal response tables")
    p.add_argument("--case", required=True,
                   help="force-step | moment-step | delta | tracking")
    p.add_argument("--values", default=None,
                   help="comma list of model-error ratios (delta case)")
    p.add_argument("--delta", type=float, default=1.0,
                   help="model-error ratio for non-sweep cases")
    p.add_argument("--non-incremental", action="store_true",
                   help="use the non-incremental loop in the delta case")
    p.add_argument("--duration", type=float, default=None)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--plot", action="store_true",
                   help="render the table as a PNG")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("metrics", help="recompute metrics from a log CSV")
    p.add_argument("--log", required=True)
    p.add_argument("--gravity", type=float, default=9.81)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("sweep", help="run many scenarios in parallel")
    p.add_argument("scenarios", nargs="+", help="scenario config files")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=None,
                   help="seed override applied to every scenario")
    p.add_argument("--jobs", type=int, default=None,
                   help="worker count (default: THREADS env or CPU count)")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
