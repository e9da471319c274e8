"""Command-line interface.

Subcommands cover the full workflow: synthesizing demand, resampling
fleet logbooks, deriving hotspots, running single simulations and
batches, and producing KPI, validation, and extrapolation reports.

Exit codes: 0 success, 1 usage error, 2 data or validation error,
3 partial batch failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from dataclasses import replace
from datetime import date
from pathlib import Path

from . import __version__
from .analytics import (
    DailyActivity,
    ExtrapolationInputs,
    StrategyAdjustments,
    StrategyTotals,
    build_kpi_table,
    extrapolate_annual,
    extrapolate_from_totals,
    validation_metrics,
)
from .batch import load_batch_config, read_run_dir, run_batch
from .demand import DemandParams, generate_logbook, synthesize_demand
from .fixtures import default_demand_params
from .hotspots import derive_hotspots
from .logbook import extract_shifts, parse_logbook, write_logbook
from .sim import Strategy, run_simulation
from .sim.config import load_scenario

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_PARTIAL = 3

WEEKDAY_NAMES = [
    "monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday",
]


class UsageError(Exception):
    """Raised for malformed command lines; mapped to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # noqa: ANN202 - argparse hook
        raise UsageError(f"{self.prog}: error: {message}")


def _load_json(path: str | Path) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: parse error at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected a JSON object")
    return data


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _parse_weekday(text: str) -> int:
    t = text.strip().lower()
    if t in WEEKDAY_NAMES:
        return WEEKDAY_NAMES.index(t)
    try:
        idx = int(t)
    except ValueError:
        raise ValueError(f"unknown weekday {text!r}") from None
    if not 0 <= idx <= 6:
        raise ValueError(f"weekday index {idx} outside 0..6 (0 = Monday)")
    return idx


def cmd_gen_demand(args: argparse.Namespace) -> int:
    overrides: dict = {}
    if args.config:
        data = _load_json(args.config)
        known = {f.name for f in dataclasses.fields(DemandParams)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(
                f"{args.config}: unknown demand parameter(s): {', '.join(unknown)}"
            )
        overrides = {
            key: tuple(value) if isinstance(value, list) else value
            for key, value in data.items()
        }
    params = default_demand_params(**overrides)
    orders = synthesize_demand(params, args.seed)
    write_logbook(args.out, orders)
    print(f"wrote {len(orders)} orders to {args.out}")
    return EXIT_OK


def cmd_gen_logbook(args: argparse.Namespace) -> int:
    day = _parse_weekday(args.day)
    source = parse_logbook(args.source)
    shifts = extract_shifts(source)
    logbook = generate_logbook(shifts, day, args.fleet_size, args.seed)
    write_logbook(args.out, logbook.orders)
    note = " (partial: source exhausted)" if logbook.partial else ""
    print(
        f"wrote {len(logbook.orders)} orders across {logbook.n_vehicles} "
        f"vehicles to {args.out}{note}"
    )
    return EXIT_OK


def cmd_derive_hotspots(args: argparse.Namespace) -> int:
    if args.every < 1:
        raise ValueError("--every must be >= 1")
    orders = parse_logbook(args.input)
    pickups = [(o.pickup_lat, o.pickup_lon) for o in orders][:: args.every]
    hotspot_set = derive_hotspots(
        pickups,
        target_count=args.target,
        min_pts=args.min_pts,
        eps_range_m=(args.eps_min, args.eps_max),
    )
    hotspot_set.write(args.out)
    print(
        f"{len(hotspot_set)} hotspots from {len(pickups)} pickups "
        f"(eps {hotspot_set.eps_m:.1f} m, min_pts {hotspot_set.min_pts}) -> {args.out}"
    )
    return EXIT_OK


def _simulate_manifest(scenario, config, output) -> dict:
    def path_of(key: str) -> str | None:
        value = scenario.source.get(key)
        if value is None:
            return None
        return str((scenario.base_dir / str(value)).resolve())

    return {
        "version": __version__,
        "day": config.day_label,
        "strategy": config.strategy.value,
        "seed": config.seed,
        "network": path_of("network"),
        "logbook": path_of("logbook"),
        "hotspots": path_of("hotspots"),
        "speed_profile": path_of("speed_profile"),
        "pob": [config.pob[0], config.pob[1]],
        "min_dwell_s": config.min_dwell_s,
        "message_latency_s": config.message_latency_s,
        "hotspot_wait_probability": config.hotspot_wait_probability,
        "max_wall_s": config.max_wall_s,
        "n_orders": output.meta.get("n_orders"),
        "n_vehicles": output.meta.get("n_vehicles"),
        "n_unroutable": output.meta.get("n_unroutable"),
    }


def cmd_simulate(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.config)
    config = scenario.config
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.strategy:
        config = replace(config, strategy=Strategy(args.strategy))
    config.validate()

    output = run_simulation(config, scenario.orders, scenario.graph, trace=args.trace)
    out = Path(args.out)
    output.write_dir(out)
    _write_json(out / "manifest.json", _simulate_manifest(scenario, config, output))

    served = sum(1 for o in output.outcomes if o.status == "served")
    unroutable = len(output.outcomes) - served
    by_reason = output.mileage_by_reason_m()
    parts = ", ".join(
        f"{reason.value} {meters / 1000.0:.1f} km"
        for reason, meters in sorted(by_reason.items(), key=lambda kv: kv[0].value)
    )
    print(f"{config.strategy.value}: {served} orders served, {unroutable} unroutable")
    print(f"mileage: {parts}, total {output.total_mileage_m / 1000.0:.1f} km")
    print(f"run written to {out}")
    return EXIT_OK


def cmd_batch(args: argparse.Namespace) -> int:
    plan, inputs = load_batch_config(args.config)
    if args.parallel is not None:
        plan = replace(plan, parallelism=args.parallel)
        plan.validate()
    result = run_batch(plan, inputs, args.out)
    print(f"{len(result.completed)}/{len(plan.runs)} runs completed")
    print(f"batch output in {result.out_dir}")
    if result.failures:
        for spec, tb in result.failures:
            last = tb.strip().splitlines()[-1] if tb.strip() else "unknown error"
            print(f"FAILED {spec.run_id}: {last}", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_kpi(args: argparse.Namespace) -> int:
    runs = [read_run_dir(d) for d in args.runs]
    table = build_kpi_table(runs, baseline=args.baseline)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        table.write_csv(out / "kpi.csv")
        with open(out / "kpi.txt", "w") as fh:
            fh.write(table.format_text())
            fh.write("\n")
    print(table.format_text())
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    run = read_run_dir(args.run)
    reference = parse_logbook(args.reference)
    report = validation_metrics(run.output, reference)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        report.write_summary_csv(out / "validation_summary.csv")
        report.write_histogram_csv(out / "validation_hist.csv")
    print(
        f"matched {len(report.ride_diffs)} orders, "
        f"{len(report.unmatched)} unmatched"
    )
    print(
        f"ride time diff: median {report.median_ride_diff_s:+.1f} s, "
        f"{100.0 * report.ride_share_within:.1f}% within {report.threshold_s:.0f} s"
    )
    print(
        f"pickup time diff: median {report.median_pickup_diff_s:+.1f} s, "
        f"{100.0 * report.pickup_share_within:.1f}% within {report.threshold_s:.0f} s"
    )
    return EXIT_OK


def cmd_extrapolate(args: argparse.Namespace) -> int:
    data = _load_json(args.config)
    baseline = str(data.get("baseline", "return"))
    rate = float(data.get("co2_g_per_km", 102.35))
    try:
        if "totals" in data:
            totals = [
                StrategyTotals(
                    strategy=str(t["strategy"]),
                    s_p=float(t["s_p"]),
                    s_r=float(t["s_r"]),
                    s_b=float(t["s_b"]),
                )
                for t in data["totals"]
            ]
            table = extrapolate_from_totals(totals, baseline=baseline, co2_g_per_km=rate)
        elif "daily" in data:
            days = [
                DailyActivity(
                    day=date.fromisoformat(str(d["date"])),
                    s_p=float(d["s_p"]),
                    s_r=float(d["s_r"]),
                    s_b=float(d["s_b"]),
                    n=int(d["n"]),
                    rho=float(d["rho"]),
                )
                for d in data["daily"]
            ]
            inputs = ExtrapolationInputs(
                days=days,
                c_y=float(data.get("c_y", 1.17)),
                co2_g_per_km=rate,
            )
            adjustments = {
                str(name): StrategyAdjustments(
                    pickup={str(k): float(v) for k, v in adj.get("pickup", {}).items()},
                    rebalancing={
                        str(k): float(v) for k, v in adj.get("rebalancing", {}).items()
                    },
                    ride={str(k): float(v) for k, v in adj.get("ride", {}).items()},
                )
                for name, adj in data.get("adjustments", {}).items()
            }
            table = extrapolate_annual(inputs, adjustments, baseline=baseline)
        else:
            raise ValueError(f"{args.config}: needs either a 'totals' or a 'daily' key")
    except KeyError as exc:
        raise ValueError(f"{args.config}: missing key {exc.args[0]!r}") from None
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        table.write_csv(out / "extrapolation.csv")
    print(table.format_text())
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="hailsim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"hailsim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser(
        "gen-demand", help="synthesize a year of ride orders into a logbook CSV"
    )
    p.add_argument("--config", help="JSON object of demand-parameter overrides")
    p.add_argument("--seed", type=int, default=0, help="demand seed (default 0)")
    p.add_argument("--out", required=True, help="output logbook CSV")
    p.set_defaults(func=cmd_gen_demand)

    p = sub.add_parser(
        "gen-logbook", help="resample a one-day fleet logbook from source orders"
    )
    p.add_argument("--source", required=True, help="source logbook CSV to resample")
    p.add_argument(
        "--day", required=True, help="weekday name or index 0-6 (0 = Monday)"
    )
    p.add_argument("--fleet-size", type=int, default=50, help="vehicles to fill")
    p.add_argument("--seed", type=int, default=0, help="sampling seed (default 0)")
    p.add_argument("--out", required=True, help="output logbook CSV")
    p.set_defaults(func=cmd_gen_logbook)

    p = sub.add_parser(
        "derive-hotspots", help="cluster historical pickups into a hotspot set"
    )
    p.add_argument("--input", required=True, help="logbook CSV of historical orders")
    p.add_argument("--target", type=int, default=60, help="desired hotspot count")
    p.add_argument("--min-pts", type=int, default=10, help="DBSCAN min_pts")
    p.add_argument("--eps-min", type=float, default=50.0, help="eps search low, m")
    p.add_argument("--eps-max", type=float, default=5000.0, help="eps search high, m")
    p.add_argument("--every", type=int, default=1, help="use every k-th pickup")
    p.add_argument(
        "--out", required=True,
        help="output hotspot CSV (a .meta.json sidecar records eps and min_pts)",
    )
    p.set_defaults(func=cmd_derive_hotspots)

    p = sub.add_parser("simulate", help="run one scenario and write a run directory")
    p.add_argument("--config", required=True, help="scenario JSON")
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.add_argument(
        "--strategy", choices=[s.value for s in Strategy],
        help="override the scenario strategy",
    )
    p.add_argument("--trace", action="store_true", help="write an event trace")
    p.add_argument("--out", required=True, help="output run directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("batch", help="run an experiment plan and merge its KPI table")
    p.add_argument("--config", required=True, help="batch JSON")
    p.add_argument("--parallel", type=int, help="override the parallelism degree")
    p.add_argument("--out", required=True, help="batch output directory")
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("kpi", help="build a KPI table from run directories")
    p.add_argument("runs", nargs="+", help="run directories written by simulate/batch")
    p.add_argument("--baseline", default="return", help="baseline strategy")
    p.add_argument("--out", help="directory for kpi.csv and kpi.txt")
    p.set_defaults(func=cmd_kpi)

    p = sub.add_parser(
        "validate", help="compare simulated times against a reference logbook"
    )
    p.add_argument("--run", required=True, help="run directory to evaluate")
    p.add_argument("--reference", required=True, help="reference logbook CSV")
    p.add_argument("--out", help="directory for summary and histogram CSVs")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser(
        "extrapolate", help="annual mileage and CO2 extrapolation table"
    )
    p.add_argument(
        "--config", required=True,
        help="JSON with daily activity plus adjustments, or per-strategy totals",
    )
    p.add_argument("--out", help="directory for extrapolation.csv")
    p.set_defaults(func=cmd_extrapolate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
