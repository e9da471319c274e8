"""The mini-berlin sample world.

A deterministic 20x20 grid network (250 m blocks, varied street speeds,
geometry-derived turn penalties) plus everything needed to exercise the
full pipeline on it: demand parameters tuned to the grid, a daytime
speed profile, fleet logbooks, a hotspot set, scenario and batch config
files, and a sample extrapolation input series.

``python3 -m hailsim.fixtures --out DIR`` materializes the file bundle;
the package ships one copy under ``hailsim/data``.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from datetime import date, timedelta
from pathlib import Path

from .demand import DemandParams, SyntheticLogbook, generate_logbook, synthesize_demand
from .hotspots import HotspotSet, derive_hotspots
from .logbook import RideOrder, Shift, extract_shifts, write_logbook
from .network import RoadGraph, SpeedProfile, TurnCostModel, turn_penalties_from_geometry

GRID_N = 20
GRID_SPACING_M = 250.0
BASE_LAT = 52.49
BASE_LON = 13.38
# metre-to-degree steps at the grid's latitude
LAT_STEP = GRID_SPACING_M / 111_320.0
LON_STEP = GRID_SPACING_M / (111_320.0 * 0.608_76)

#: node of the operator hub, well off the demand center so return trips
#: carry measurable mileage
POB_ROW = 14
POB_COL = 14


def _node_id(row: int, col: int) -> int:
    return row * GRID_N + col


def _node_latlon(row: int, col: int) -> tuple[float, float]:
    return BASE_LAT + row * LAT_STEP, BASE_LON + col * LON_STEP


def _segment_speed(a: int, b: int) -> float:
    """Deterministic street speed in 0.5 m/s steps over [8, 14] m/s."""
    lo, hi = (a, b) if a < b else (b, a)
    return 8.0 + ((lo * 31 + hi * 17) % 13) * 0.5


def mini_berlin() -> RoadGraph:
    """The sample road network: a 20x20 bidirectional grid."""
    nodes = [
        (_node_id(r, c), *_node_latlon(r, c))
        for r in range(GRID_N)
        for c in range(GRID_N)
    ]
    edges = []
    eid = 0
    for r in range(GRID_N):
        for c in range(GRID_N):
            a = _node_id(r, c)
            for dr, dc in ((0, 1), (1, 0)):
                rr, cc = r + dr, c + dc
                if rr >= GRID_N or cc >= GRID_N:
                    continue
                b = _node_id(rr, cc)
                speed = _segment_speed(a, b)
                edges.append((eid, a, b, GRID_SPACING_M, speed))
                edges.append((eid + 1, b, a, GRID_SPACING_M, speed))
                eid += 2
    penalties = turn_penalties_from_geometry(nodes, edges, TurnCostModel())
    return RoadGraph.from_data(nodes, edges, penalties)


def pob_latlon() -> tuple[float, float]:
    return _node_latlon(POB_ROW, POB_COL)


def grid_bbox() -> tuple[float, float, float, float]:
    lat_max, lon_max = _node_latlon(GRID_N - 1, GRID_N - 1)
    return (BASE_LAT, BASE_LON, lat_max, lon_max)


def grid_center() -> tuple[float, float]:
    return _node_latlon((GRID_N - 1) // 2, (GRID_N - 1) // 2)


def default_demand_params(**overrides) -> DemandParams:
    """Demand law anchored to the mini-berlin grid."""
    base = dict(
        center=grid_center(),
        pob=pob_latlon(),
        bbox=grid_bbox(),
    )
    base.update(overrides)
    return DemandParams(**base)


def urban_profile() -> SpeedProfile:
    """A plausible weekday speed profile: rush-hour dips, free-flow night."""
    return SpeedProfile(
        [
            (0.0, 1.0),
            (6.0, 0.85),
            (7.5, 0.7),
            (9.5, 0.85),
            (15.5, 0.75),
            (18.5, 0.85),
            (21.0, 1.0),
        ]
    )


def source_year(seed: int | str = 0, params: DemandParams | None = None) -> list[RideOrder]:
    """One synthetic year of observed-fleet orders."""
    return synthesize_demand(params or default_demand_params(), seed)


def fleet_logbook(
    day_of_week: int,
    fleet_size: int = 50,
    seed: int | str = 0,
    source: list[Shift] | None = None,
) -> SyntheticLogbook:
    """A one-day fleet logbook resampled from the synthetic year."""
    if source is None:
        source = extract_shifts(source_year(seed))
    return generate_logbook(source, day_of_week, fleet_size, seed)


#: clustering knobs tuned to the fixture's pickup density (the library
#: default min_pts stays at 10 for generic inputs)
HOTSPOT_SAMPLE_STRIDE = 7
HOTSPOT_MIN_PTS = 12


def fixture_hotspots(
    orders: list[RideOrder] | None = None, target_count: int = 20
) -> HotspotSet:
    """Hotspots derived from a deterministic subsample of year pickups.

    The default of 20 hotspots fits the mini-berlin scale: with more, the
    grid is so densely covered that nearest-hotspot legs shrink to a block
    or two and the Hotspot strategy degenerates into Wait. The eps search
    window is capped at 400 m: with 250 m blocks, radii beyond that merge
    whole neighborhoods.
    """
    if orders is None:
        orders = source_year(0)
    pickups = [(o.pickup_lat, o.pickup_lon) for o in orders][::HOTSPOT_SAMPLE_STRIDE]
    return derive_hotspots(pickups, target_count=target_count,
                           min_pts=HOTSPOT_MIN_PTS,
                           eps_range_m=(50.0, 400.0))


def sample_extrapolation_inputs(seed: int = 0) -> dict:
    """A year of daily fleet-activity records in the extrapolate format.

    Fleet size steps monthly between 4321 and 4486; utilization varies in
    [0.2, 0.9]; per-vehicle mileages follow the weekday/weekend split.
    """
    rng = random.Random(f"{seed}|extrapolation")
    start = date(2025, 1, 1)
    daily = []
    for i in range(365):
        d = start + timedelta(days=i)
        n = 4321 + round((4486 - 4321) * (d.month - 1) / 11)
        weekend = d.weekday() >= 4
        if weekend:
            s_p, s_r, s_b = rng.uniform(34, 42), rng.uniform(98, 112), rng.uniform(52, 62)
        else:
            s_p, s_r, s_b = rng.uniform(28, 36), rng.uniform(88, 100), rng.uniform(46, 56)
        daily.append(
            {
                "date": d.isoformat(),
                "s_p": round(s_p, 3),
                "s_r": round(s_r, 3),
                "s_b": round(s_b, 3),
                "n": n,
                "rho": round(rng.uniform(0.2, 0.9), 3),
            }
        )
    return {
        "c_y": 1.17,
        "co2_g_per_km": 102.35,
        "baseline": "return",
        "daily": daily,
        "adjustments": {
            "wait": {
                "pickup": {"wednesday": 0.14, "saturday": 0.11},
                "rebalancing": {"wednesday": -1.0, "saturday": -1.0},
            },
            "hotspot": {
                "pickup": {"wednesday": 0.15, "saturday": 0.12},
                "rebalancing": {"wednesday": -0.78, "saturday": -0.75},
            },
        },
    }


def _scenario_json(day_label: str, logbook_file: str) -> dict:
    return {
        "strategy": "return",
        "pob": list(pob_latlon()),
        "network": "mini_berlin.json",
        "logbook": logbook_file,
        "hotspots": "hotspots.csv",
        "seed": 0,
        "day_label": day_label,
    }


def _batch_json() -> dict:
    return {
        "network": "mini_berlin.json",
        "pob": list(pob_latlon()),
        "days": {
            "wednesday": "logbook_wednesday.csv",
            "saturday": "logbook_saturday.csv",
        },
        "strategies": ["return", "wait", "hotspot"],
        "seeds": list(range(8)),
        "hotspots": "hotspots.csv",
        "baseline": "return",
        "parallelism": 1,
    }


def materialize(out_dir: str | Path, fleet_size: int = 50, seed: int = 0) -> list[Path]:
    """Write the full fixture bundle into ``out_dir``; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    graph = mini_berlin()
    graph.to_json(out / "mini_berlin.json")
    written.append(out / "mini_berlin.json")

    urban_profile().to_json(out / "profile_urban.json")
    written.append(out / "profile_urban.json")

    year = source_year(seed)
    shifts = extract_shifts(year)
    for day_of_week, name in ((2, "wednesday"), (5, "saturday")):
        lb = generate_logbook(shifts, day_of_week, fleet_size, seed)
        path = out / f"logbook_{name}.csv"
        write_logbook(path, lb.orders)
        written.append(path)

    hotspots = fixture_hotspots(year)
    hotspots.write(out / "hotspots.csv")
    written.append(out / "hotspots.csv")

    for name in ("wednesday", "saturday"):
        path = out / f"scenario_{name}.json"
        with open(path, "w") as fh:
            json.dump(_scenario_json(name, f"logbook_{name}.csv"), fh, indent=2)
            fh.write("\n")
        written.append(path)

    with open(out / "batch_fixture.json", "w") as fh:
        json.dump(_batch_json(), fh, indent=2)
        fh.write("\n")
    written.append(out / "batch_fixture.json")

    with open(out / "extrapolation_sample.json", "w") as fh:
        json.dump(sample_extrapolation_inputs(seed), fh, indent=2)
        fh.write("\n")
    written.append(out / "extrapolation_sample.json")
    return written


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="python3 -m hailsim.fixtures",
        description="Materialize the mini-berlin fixture bundle.",
    )
    parser.add_argument("--out", default="fixture_data", help="output directory")
    parser.add_argument("--fleet-size", type=int, default=50)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    for path in materialize(args.out, args.fleet_size, args.seed):
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
