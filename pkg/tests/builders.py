"""Hand-sized graphs, orders, and point sets shared across test modules.

Coordinates are laid out on a local meter grid around central Berlin so
haversine distances match the intended meter lengths to well under 0.1%.
"""

from __future__ import annotations

import math
import random

from hailsim.logbook import RideOrder
from hailsim.network import RoadGraph

BASE_LAT = 52.5
BASE_LON = 13.4
M_PER_DEG_LAT = 111_320.0
M_PER_DEG_LON = 111_320.0 * math.cos(math.radians(BASE_LAT))


def latlon(x_m: float, y_m: float) -> tuple[float, float]:
    """Map local meters (east, north) to WGS84 degrees."""
    return (BASE_LAT + y_m / M_PER_DEG_LAT, BASE_LON + x_m / M_PER_DEG_LON)


def make_graph(
    positions: dict[int, tuple[float, float]],
    arcs: list[tuple[int, int, float, float]],
    penalties: dict[tuple[int, int], float] | None = None,
) -> RoadGraph:
    """Build a graph from node positions in meters and (u, v, len, speed) arcs.

    Edge ids are the arc list positions, so penalty keys are list indices.
    """
    nodes = [(nid, *latlon(x, y)) for nid, (x, y) in sorted(positions.items())]
    edges = [(i, u, v, length, speed) for i, (u, v, length, speed) in enumerate(arcs)]
    return RoadGraph.from_data(nodes, edges, penalties or {})


def line_graph(
    n: int = 4, length_m: float = 100.0, speed_mps: float = 10.0
) -> RoadGraph:
    """Two-way chain 0 - 1 - ... - n-1 with equal edges and no penalties."""
    positions = {i: (i * length_m, 0.0) for i in range(n)}
    arcs: list[tuple[int, int, float, float]] = []
    for i in range(n - 1):
        arcs.append((i, i + 1, length_m, speed_mps))
        arcs.append((i + 1, i, length_m, speed_mps))
    return make_graph(positions, arcs)


def random_graph(rng: random.Random, max_nodes: int = 12) -> RoadGraph:
    """Small connected-ish directed graph with random turn penalties."""
    n = rng.randint(4, max_nodes)
    positions = {
        i: (rng.uniform(0.0, 2000.0), rng.uniform(0.0, 2000.0)) for i in range(n)
    }
    arcs: list[tuple[int, int, float, float]] = []
    seen: set[tuple[int, int]] = set()
    # a random spine touching every node keeps most pairs reachable
    order = list(range(n))
    rng.shuffle(order)
    for a, b in zip(order, order[1:]):
        for u, v in ((a, b), (b, a)):
            if (u, v) not in seen:
                seen.add((u, v))
                arcs.append((u, v, rng.uniform(50.0, 400.0), rng.uniform(5.0, 15.0)))
    extra = rng.randint(0, 2 * n)
    for _ in range(extra):
        u, v = rng.randrange(n), rng.randrange(n)
        if u == v or (u, v) in seen:
            continue
        seen.add((u, v))
        arcs.append((u, v, rng.uniform(50.0, 400.0), rng.uniform(5.0, 15.0)))
    graph = make_graph(positions, arcs)
    penalties: dict[tuple[int, int], float] = {}
    for e_in in range(len(arcs)):
        for e_out in graph.out_edges[graph.edges[e_in].head]:
            if rng.random() < 0.5:
                penalties[(e_in, e_out)] = rng.choice([0.0, 5.0, 15.0, 30.0])
    return make_graph(positions, arcs, penalties)


def order_at(
    order_id: int,
    vehicle: str,
    t: int,
    accept: tuple[float, float],
    pickup: tuple[float, float],
    dropoff: tuple[float, float],
    ride_s: int = 300,
    lead_s: int = 120,
) -> RideOrder:
    """An order issued at ``t`` with plausible reference timestamps."""
    return RideOrder(
        order_id=order_id,
        vehicle_id=vehicle,
        order_time=t,
        accept_lat=accept[0],
        accept_lon=accept[1],
        pickup_time=t + lead_s,
        pickup_lat=pickup[0],
        pickup_lon=pickup[1],
        dropoff_time=t + lead_s + ride_s,
        dropoff_lat=dropoff[0],
        dropoff_lon=dropoff[1],
    )


def blob(
    rng: random.Random, center_xy: tuple[float, float], sigma_m: float, count: int
) -> list[tuple[float, float]]:
    """Gaussian point cloud in local meters, returned as lat/lon."""
    cx, cy = center_xy
    return [
        latlon(rng.gauss(cx, sigma_m), rng.gauss(cy, sigma_m)) for _ in range(count)
    ]
