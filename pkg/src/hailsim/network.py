"""Road-network representation and map matching.

A :class:`RoadGraph` is a directed graph with per-edge length and free-flow
speed plus an optional turn-penalty table keyed by (incoming edge, outgoing
edge). Graphs are immutable after construction and safe to share across
concurrently running simulations.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geo import haversine_m_vec, initial_bearing_deg, turn_angle_deg

log = logging.getLogger(__name__)

NodeId = int | str
EdgeId = int | str


class NetworkError(ValueError):
    """Raised for malformed or referentially broken network files."""


@dataclass(frozen=True)
class Edge:
    edge_id: EdgeId
    tail: int  # node index
    head: int  # node index
    length_m: float
    speed_mps: float


@dataclass
class RoadGraph:
    """Immutable directed road network.

    Nodes are stored sorted by id so that vectorized nearest-node queries
    resolve distance ties to the lowest node id. ``turn_penalties`` maps
    (incoming edge index, outgoing edge index) to seconds.
    """

    node_ids: list[NodeId]
    lats: np.ndarray
    lons: np.ndarray
    edges: list[Edge]
    turn_penalties: dict[tuple[int, int], float]
    out_edges: list[list[int]] = field(default_factory=list)
    in_edges: list[list[int]] = field(default_factory=list)
    component_count: int = 1

    def __post_init__(self):
        self._node_index = {nid: i for i, nid in enumerate(self.node_ids)}
        self._edge_index = {e.edge_id: i for i, e in enumerate(self.edges)}
        if not self.out_edges:
            self.out_edges = [[] for _ in self.node_ids]
            self.in_edges = [[] for _ in self.node_ids]
            for i, e in enumerate(self.edges):
                self.out_edges[e.tail].append(i)
                self.in_edges[e.head].append(i)
            # stable iteration order for deterministic tie-breaking in searches
            for adj in self.out_edges:
                adj.sort()
            for adj in self.in_edges:
                adj.sort()

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def max_speed_mps(self) -> float:
        return max(e.speed_mps for e in self.edges) if self.edges else 0.0

    def node_index(self, node_id: NodeId) -> int:
        try:
            return self._node_index[node_id]
        except KeyError:
            raise NetworkError(f"unknown node id {node_id!r}") from None

    def edge_index(self, edge_id: EdgeId) -> int:
        try:
            return self._edge_index[edge_id]
        except KeyError:
            raise NetworkError(f"unknown edge id {edge_id!r}") from None

    def node_latlon(self, index: int) -> tuple[float, float]:
        return float(self.lats[index]), float(self.lons[index])

    def turn_penalty_s(self, in_edge: int, out_edge: int) -> float:
        return self.turn_penalties.get((in_edge, out_edge), 0.0)

    @classmethod
    def from_data(
        cls,
        nodes: list[tuple[NodeId, float, float]],
        edges: list[tuple[EdgeId, NodeId, NodeId, float, float]],
        turn_penalties: dict[tuple[EdgeId, EdgeId], float] | None = None,
    ) -> "RoadGraph":
        """Build and validate a graph from plain tuples.

        ``nodes``: (id, lat, lon). ``edges``: (id, from, to, length_m,
        speed_mps). Turn penalties are keyed by edge ids and must reference
        an adjacent pair (head of incoming == tail of outgoing).
        """
        if not nodes:
            raise NetworkError("network has no nodes")
        ids = [n[0] for n in nodes]
        if len(set(ids)) != len(ids):
            raise NetworkError("duplicate node ids")
        order = sorted(range(len(nodes)), key=lambda i: ids[i])
        node_ids = [ids[i] for i in order]
        lats = np.array([float(nodes[i][1]) for i in order])
        lons = np.array([float(nodes[i][2]) for i in order])
        if not (np.all(np.isfinite(lats)) and np.all(np.isfinite(lons))):
            raise NetworkError("node coordinates must be finite")
        node_index = {nid: i for i, nid in enumerate(node_ids)}

        seen_edges: set[EdgeId] = set()
        built: list[Edge] = []
        for eid, frm, to, length, speed in edges:
            if eid in seen_edges:
                raise NetworkError(f"duplicate edge id {eid!r}")
            seen_edges.add(eid)
            if frm not in node_index:
                raise NetworkError(f"edge {eid!r} references unknown node {frm!r}")
            if to not in node_index:
                raise NetworkError(f"edge {eid!r} references unknown node {to!r}")
            if not length > 0:
                raise NetworkError(f"edge {eid!r} has non-positive length {length}")
            if not speed > 0:
                raise NetworkError(f"edge {eid!r} has non-positive speed {speed}")
            built.append(Edge(eid, node_index[frm], node_index[to], float(length), float(speed)))

        edge_index = {e.edge_id: i for i, e in enumerate(built)}
        penalties: dict[tuple[int, int], float] = {}
        for (in_id, out_id), seconds in (turn_penalties or {}).items():
            if in_id not in edge_index:
                raise NetworkError(f"turn penalty references unknown edge {in_id!r}")
            if out_id not in edge_index:
                raise NetworkError(f"turn penalty references unknown edge {out_id!r}")
            if seconds < 0:
                raise NetworkError(f"turn penalty ({in_id!r}, {out_id!r}) is negative")
            ein, eout = built[edge_index[in_id]], built[edge_index[out_id]]
            if ein.head != eout.tail:
                raise NetworkError(
                    f"turn penalty ({in_id!r}, {out_id!r}) references edges that do not meet"
                )
            penalties[(edge_index[in_id], edge_index[out_id])] = float(seconds)

        graph = cls(node_ids, lats, lons, built, penalties)
        graph.component_count = _weak_component_count(graph)
        if graph.component_count > 1:
            log.warning("network is not weakly connected: %d components", graph.component_count)
        return graph

    def to_json(self, path: str | Path) -> None:
        data = {
            "nodes": [
                {"id": nid, "lat": float(self.lats[i]), "lon": float(self.lons[i])}
                for i, nid in enumerate(self.node_ids)
            ],
            "edges": [
                {
                    "id": e.edge_id,
                    "from": self.node_ids[e.tail],
                    "to": self.node_ids[e.head],
                    "length_m": e.length_m,
                    "speed_mps": e.speed_mps,
                }
                for e in self.edges
            ],
            "turn_penalties": [
                {
                    "from_edge": self.edges[i].edge_id,
                    "to_edge": self.edges[j].edge_id,
                    "seconds": s,
                }
                for (i, j), s in sorted(self.turn_penalties.items())
            ],
        }
        with open(path, "w") as fh:
            json.dump(data, fh)


def _weak_component_count(graph: RoadGraph) -> int:
    parent = list(range(graph.n_nodes))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for e in graph.edges:
        a, b = find(e.tail), find(e.head)
        if a != b:
            parent[a] = b
    return len({find(i) for i in range(graph.n_nodes)})


def load_network(path: str | Path) -> RoadGraph:
    """Load and validate a network JSON file.

    The file carries top-level ``nodes`` (id, lat, lon) and ``edges`` (id,
    from, to, length_m, speed_mps) arrays and an optional ``turn_penalties``
    array of (from_edge, to_edge, seconds) objects.
    """
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise NetworkError(f"{path}: parse error at line {exc.lineno}: {exc.msg}") from exc

    def need(obj: dict, key: str, where: str):
        if key not in obj:
            raise NetworkError(f"{path}: missing {key!r} in {where}")
        return obj[key]

    nodes = [
        (need(n, "id", "node"), float(need(n, "lat", "node")), float(need(n, "lon", "node")))
        for n in need(data, "nodes", "file")
    ]
    edges = [
        (
            need(e, "id", "edge"),
            need(e, "from", "edge"),
            need(e, "to", "edge"),
            float(need(e, "length_m", "edge")),
            float(need(e, "speed_mps", "edge")),
        )
        for e in need(data, "edges", "file")
    ]
    penalties = {
        (need(t, "from_edge", "turn penalty"), need(t, "to_edge", "turn penalty")): float(
            need(t, "seconds", "turn penalty")
        )
        for t in data.get("turn_penalties", [])
    }
    return RoadGraph.from_data(nodes, edges, penalties)


def nearest_node(graph: RoadGraph, lat: float, lon: float) -> NodeId:
    """Map-match a coordinate to the closest node by great-circle distance.

    Ties resolve to the lowest node id.
    """
    if graph.n_nodes == 0:
        raise NetworkError("cannot match a location on an empty graph")
    dists = haversine_m_vec(lat, lon, graph.lats, graph.lons)
    return graph.node_ids[int(np.argmin(dists))]


def nearest_node_index(graph: RoadGraph, lat: float, lon: float) -> int:
    if graph.n_nodes == 0:
        raise NetworkError("cannot match a location on an empty graph")
    dists = haversine_m_vec(lat, lon, graph.lats, graph.lons)
    return int(np.argmin(dists))


@dataclass(frozen=True)
class TurnCostModel:
    """Classifies heading changes and assigns penalty seconds.

    Left turns against oncoming traffic and U-turns are the expensive moves;
    right turns and going straight are free by default. All values are
    per-scenario configurable.
    """

    left_s: float = 15.0
    u_turn_s: float = 30.0
    right_s: float = 0.0
    straight_s: float = 0.0
    straight_max_deg: float = 30.0
    u_turn_min_deg: float = 150.0

    def penalty_for_angle(self, delta_deg: float) -> float:
        if abs(delta_deg) >= self.u_turn_min_deg:
            return self.u_turn_s
        if abs(delta_deg) <= self.straight_max_deg:
            return self.straight_s
        return self.right_s if delta_deg > 0 else self.left_s


def turn_penalties_from_geometry(
    nodes: list[tuple[NodeId, float, float]],
    edges: list[tuple[EdgeId, NodeId, NodeId, float, float]],
    model: TurnCostModel | None = None,
) -> dict[tuple[EdgeId, EdgeId], float]:
    """Derive a turn-penalty table from edge bearings at shared nodes.

    Only nonzero penalties are emitted.
    """
    model = model or TurnCostModel()
    coords = {nid: (lat, lon) for nid, lat, lon in nodes}
    by_tail: dict[NodeId, list[tuple[EdgeId, NodeId]]] = {}
    for eid, frm, to, _, _ in edges:
        by_tail.setdefault(frm, []).append((eid, to))
    penalties: dict[tuple[EdgeId, EdgeId], float] = {}
    for eid, frm, to, _, _ in edges:
        b_in = initial_bearing_deg(*coords[frm], *coords[to])
        for out_id, out_to in by_tail.get(to, []):
            b_out = initial_bearing_deg(*coords[to], *coords[out_to])
            seconds = model.penalty_for_angle(turn_angle_deg(b_in, b_out))
            if seconds > 0:
                penalties[(eid, out_id)] = seconds
    return penalties


class SpeedProfile:
    """Piecewise-constant speed multiplier over the time of day.

    Factors are in (0, 1] and scale every edge's free-flow speed; the
    breakpoints must start at hour 0 and cover the full 24 h. The uniform
    profile models an empty network.
    """

    def __init__(self, breakpoints: list[tuple[float, float]]):
        if not breakpoints:
            raise ValueError("speed profile needs at least one breakpoint")
        hours = [h for h, _ in breakpoints]
        if hours[0] != 0.0:
            raise ValueError("speed profile must start at hour 0")
        if any(b >= a for a, b in zip(hours[1:], hours)) or hours[-1] >= 24.0:
            raise ValueError("speed profile breakpoints must be increasing within [0, 24)")
        if any(not (0.0 < f <= 1.0) for _, f in breakpoints):
            raise ValueError("speed profile factors must be in (0, 1]")
        self.breakpoints = [(float(h), float(f)) for h, f in breakpoints]

    @classmethod
    def uniform(cls) -> "SpeedProfile":
        return cls([(0.0, 1.0)])

    @property
    def is_uniform(self) -> bool:
        return all(f == 1.0 for _, f in self.breakpoints)

    def factor_at(self, epoch_s: float) -> float:
        hour = (epoch_s % 86400.0) / 3600.0
        factor = self.breakpoints[-1][1]
        for h, f in self.breakpoints:
            if hour >= h:
                factor = f
            else:
                break
        return factor

    @classmethod
    def from_json(cls, path: str | Path) -> "SpeedProfile":
        with open(path) as fh:
            data = json.load(fh)
        return cls([(float(h), float(f)) for h, f in data["breakpoints"]])

    def to_json(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            json.dump({"breakpoints": self.breakpoints}, fh)
