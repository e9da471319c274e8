"""Turn-aware fastest-path routing.

The search runs on the edge-expanded graph: states are directed edges, so a
turn penalty between two edges is charged exactly once, where the turn
happens. The speed-profile factor is sampled once at the departure instant
and scales every edge's free-flow speed for the whole query.

Cost accumulation is kept in a fixed floating-point order (documented on
:func:`fastest_path`) so that a reconstructed timeline reproduces the search
cost bit for bit; simulations rely on this for deterministic event times.
"""

from __future__ import annotations

import heapq
import math
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .geo import interpolate
from .network import NodeId, RoadGraph, SpeedProfile


@dataclass(frozen=True)
class Route:
    """A directed path through the graph.

    ``nodes`` has one more entry than ``edges`` (a lone node for the empty
    route); ``duration_s`` includes ``lead_in_s`` plus, for every edge, the
    profile-adjusted traversal time and the turn penalty from its
    predecessor. ``lead_in_s`` is nonzero only for continuation routes that
    start with a turn off a given approach edge.
    """

    edges: tuple[int, ...]
    nodes: tuple[int, ...]
    length_m: float
    duration_s: float
    lead_in_s: float = 0.0

    @property
    def is_empty(self) -> bool:
        return not self.edges

    @property
    def start_node(self) -> int:
        return self.nodes[0]

    @property
    def end_node(self) -> int:
        return self.nodes[-1]


def _edge_time(graph: RoadGraph, edge_idx: int, factor: float) -> float:
    e = graph.edges[edge_idx]
    return e.length_m / (e.speed_mps * factor)


def _search(
    graph: RoadGraph,
    initial: list[tuple[float, int]],
    dest_idx: int,
    factor: float,
) -> tuple[float, int, dict[int, int]] | None:
    """Edge-expanded Dijkstra from pre-seeded edge states.

    Returns (cost, final edge, predecessor map) for the cheapest edge whose
    head is ``dest_idx``, or None if no seeded state reaches it.
    """
    dist: dict[int, float] = {}
    pred: dict[int, int] = {}
    heap: list[tuple[float, int]] = []
    for cost, eidx in initial:
        if eidx not in dist or cost < dist[eidx]:
            dist[eidx] = cost
            heapq.heappush(heap, (cost, eidx))
    while heap:
        cost, eidx = heapq.heappop(heap)
        if cost > dist.get(eidx, math.inf):
            continue
        edge = graph.edges[eidx]
        if edge.head == dest_idx:
            return cost, eidx, pred
        for nxt in graph.out_edges[edge.head]:
            # fixed accumulation order: (cost so far + penalty) + edge time
            at_tail = cost + graph.turn_penalty_s(eidx, nxt)
            new_cost = at_tail + _edge_time(graph, nxt, factor)
            if new_cost < dist.get(nxt, math.inf):
                dist[nxt] = new_cost
                pred[nxt] = eidx
                heapq.heappush(heap, (new_cost, nxt))
    return None


def _reconstruct(
    graph: RoadGraph,
    final_edge: int,
    pred: dict[int, int],
    cost: float,
    lead_in_s: float,
    start_node: int,
) -> Route:
    chain: list[int] = []
    cur: int | None = final_edge
    while cur is not None:
        chain.append(cur)
        cur = pred.get(cur)
    chain.reverse()
    nodes = [start_node] + [graph.edges[e].head for e in chain]
    length = 0.0
    for e in chain:
        length = length + graph.edges[e].length_m
    return Route(tuple(chain), tuple(nodes), length, cost, lead_in_s)


def fastest_path(
    graph: RoadGraph,
    origin: NodeId,
    dest: NodeId,
    departure_s: float = 0.0,
    profile: SpeedProfile | None = None,
) -> Route | None:
    """Minimum-travel-time route from ``origin`` to ``dest``.

    Cost = Σ edge_length / (edge_speed × profile factor at ``departure_s``)
    + Σ turn penalties, accumulated edge by edge as
    ``cost' = (cost + penalty) + edge_time``. Returns an empty route when
    origin equals dest and None when dest is unreachable.
    """
    o = graph.node_index(origin)
    d = graph.node_index(dest)
    if o == d:
        return Route((), (o,), 0.0, 0.0)
    factor = profile.factor_at(departure_s) if profile is not None else 1.0
    initial = [(_edge_time(graph, e, factor), e) for e in graph.out_edges[o]]
    hit = _search(graph, initial, d, factor)
    if hit is None:
        return None
    cost, final_edge, pred = hit
    return _reconstruct(graph, final_edge, pred, cost, 0.0, o)


def fastest_path_from_edge(
    graph: RoadGraph,
    via_edge: int,
    dest: NodeId,
    departure_s: float = 0.0,
    profile: SpeedProfile | None = None,
) -> Route | None:
    """Continuation route for a vehicle that will arrive at the head of
    ``via_edge`` and turns from it onto the new route.

    The turn penalty off ``via_edge`` is charged as the route's lead-in.
    """
    d = graph.node_index(dest)
    head = graph.edges[via_edge].head
    if head == d:
        return Route((), (head,), 0.0, 0.0)
    factor = profile.factor_at(departure_s) if profile is not None else 1.0
    initial = []
    for e in graph.out_edges[head]:
        at_tail = graph.turn_penalty_s(via_edge, e)
        initial.append((at_tail + _edge_time(graph, e, factor), e))
    hit = _search(graph, initial, d, factor)
    if hit is None:
        return None
    cost, final_edge, pred = hit
    route = _reconstruct(graph, final_edge, pred, cost, 0.0, head)
    lead = graph.turn_penalty_s(via_edge, route.edges[0])
    return Route(route.edges, route.nodes, route.length_m, cost, lead)


def travel_time_field(
    graph: RoadGraph, dest: NodeId, factor: float = 1.0
) -> tuple[np.ndarray, np.ndarray]:
    """All-to-one travel times (and route lengths) into ``dest``.

    One backward edge-expanded Dijkstra replaces a forward query per origin;
    used for year-scale return-trip estimates. Returns (seconds, metres)
    arrays indexed by node, inf where dest is unreachable.
    """
    d = graph.node_index(dest)
    n_e = graph.n_edges
    # cost[e] = time from tail of e to dest, entering via e
    cost = np.full(n_e, math.inf)
    dist_m = np.full(n_e, math.inf)
    heap: list[tuple[float, int]] = []
    for e in graph.in_edges[d]:
        cost[e] = _edge_time(graph, e, factor)
        dist_m[e] = graph.edges[e].length_m
        heapq.heappush(heap, (cost[e], e))
    while heap:
        c, eidx = heapq.heappop(heap)
        if c > cost[eidx]:
            continue
        tail = graph.edges[eidx].tail
        for prv in graph.in_edges[tail]:
            new_cost = _edge_time(graph, prv, factor) + graph.turn_penalty_s(prv, eidx) + c
            if new_cost < cost[prv]:
                cost[prv] = new_cost
                dist_m[prv] = graph.edges[prv].length_m + dist_m[eidx]
                heapq.heappush(heap, (new_cost, prv))
    node_time = np.full(graph.n_nodes, math.inf)
    node_dist = np.full(graph.n_nodes, math.inf)
    node_time[d] = 0.0
    node_dist[d] = 0.0
    for i in range(graph.n_nodes):
        if i == d:
            continue
        for e in graph.out_edges[i]:
            if cost[e] < node_time[i]:
                node_time[i] = cost[e]
                node_dist[i] = dist_m[e]
    return node_time, node_dist


@dataclass(frozen=True)
class _Segment:
    t0: float
    t1: float
    d0: float
    d1: float
    edge: int | None  # None while waiting out a turn penalty
    a: tuple[float, float]
    b: tuple[float, float]
    frac0: float = 0.0  # fraction of the edge already behind at t0
    frac1: float = 1.0


@dataclass(frozen=True)
class CutPoint:
    """Snapshot of a vehicle interrupted mid-route at some instant.

    ``edge``/``edge_frac`` locate the vehicle (frac 1.0 means it sits at
    the edge's head, e.g. while waiting out a turn); both are None/0 when
    the route had not started. ``distance_m`` is how much of this trip was
    actually driven.
    """

    time_s: float
    distance_m: float
    edge: int | None
    edge_frac: float
    node: int
    position: tuple[float, float]


class RouteSchedule:
    """Timeline of a vehicle following a sequence of edges.

    Distance over time is continuous and piecewise linear: it advances at
    profile-adjusted edge speed on travel segments and holds still while a
    turn penalty is served. ``start_frac`` lets a trip begin partway along
    its first edge (a diverted vehicle cannot leave an edge early);
    ``via_edge`` charges the turn off a previous edge when starting at a
    node with approach context. Event times for whole routes reproduce the
    router's cost accumulation bit for bit.
    """

    def __init__(
        self,
        graph: RoadGraph,
        edges: tuple[int, ...],
        depart_s: float,
        factor: float = 1.0,
        start_frac: float = 0.0,
        via_edge: int | None = None,
        start_node: int | None = None,
        lead_in_s: float | None = None,
    ):
        self.graph = graph
        self.edges = tuple(edges)
        self.depart_s = depart_s
        self.factor = factor
        self.start_frac = start_frac if self.edges else 0.0
        if start_node is None:
            if not self.edges:
                raise ValueError("empty schedule needs an explicit start_node")
            start_node = graph.edges[self.edges[0]].tail
        self.start_node = start_node

        segs: list[_Segment] = []
        rel = 0.0
        dist = 0.0
        prev: int | None = None
        for n, eidx in enumerate(self.edges):
            e = graph.edges[eidx]
            frac0 = self.start_frac if n == 0 else 0.0
            if n == 0:
                if lead_in_s is not None:
                    pen = lead_in_s if frac0 == 0.0 else 0.0
                elif via_edge is not None and frac0 == 0.0:
                    pen = graph.turn_penalty_s(via_edge, eidx)
                else:
                    pen = 0.0
            else:
                pen = graph.turn_penalty_s(prev, eidx)
            tail_ll = graph.node_latlon(e.tail)
            head_ll = graph.node_latlon(e.head)
            from_ll = interpolate(*tail_ll, *head_ll, frac0) if frac0 > 0.0 else tail_ll
            at_tail = rel + pen
            if pen > 0.0:
                segs.append(
                    _Segment(
                        depart_s + rel, depart_s + at_tail, dist, dist, None,
                        from_ll, from_ll,
                    )
                )
            length = e.length_m if frac0 == 0.0 else e.length_m * (1.0 - frac0)
            tt = length / (e.speed_mps * factor)
            rel = at_tail + tt
            segs.append(
                _Segment(
                    depart_s + at_tail, depart_s + rel, dist, dist + length, eidx,
                    from_ll, head_ll, frac0, 1.0,
                )
            )
            dist = dist + length
            prev = eidx
        self.segments = segs
        self.total_length_m = dist
        self.arrival_s = segs[-1].t1 if segs else depart_s
        self._starts = [s.t0 for s in segs]

    @classmethod
    def from_route(
        cls, graph: RoadGraph, route: Route, depart_s: float, factor: float = 1.0
    ) -> "RouteSchedule":
        return cls(
            graph,
            route.edges,
            depart_s,
            factor,
            start_node=route.start_node,
            lead_in_s=route.lead_in_s,
        )

    @property
    def end_node(self) -> int:
        if not self.edges:
            return self.start_node
        return self.graph.edges[self.edges[-1]].head

    def _segment_index_at(self, t: float) -> int:
        i = bisect_right(self._starts, t) - 1
        return 0 if i < 0 else i

    def position_at(self, t: float) -> tuple[float, float]:
        if not self.segments or t <= self.depart_s:
            if self.segments:
                return self.segments[0].a
            return self.graph.node_latlon(self.start_node)
        if t >= self.arrival_s:
            return self.graph.node_latlon(self.end_node)
        s = self.segments[self._segment_index_at(t)]
        if s.edge is None or s.t1 == s.t0:
            return s.a
        u = (t - s.t0) / (s.t1 - s.t0)
        return interpolate(*s.a, *s.b, min(max(u, 0.0), 1.0))

    def distance_at(self, t: float) -> float:
        if not self.segments or t <= self.depart_s:
            return 0.0
        if t >= self.arrival_s:
            return self.total_length_m
        s = self.segments[self._segment_index_at(t)]
        if s.edge is None or s.t1 == s.t0:
            return s.d0
        u = (t - s.t0) / (s.t1 - s.t0)
        return s.d0 + (s.d1 - s.d0) * min(max(u, 0.0), 1.0)

    def cut_at(self, t: float) -> CutPoint:
        """Where the vehicle is if interrupted at time ``t``.

        During a turn wait the vehicle already sits at the turn's node
        (the previous edge is complete, frac 1.0); the pending wait is
        abandoned and any new plan charges its own turn instead.
        """
        if not self.segments or t <= self.depart_s:
            pos = self.position_at(t)
            if self.segments and self.start_frac > 0.0:
                edge = self.edges[0]
                return CutPoint(
                    max(t, self.depart_s), 0.0, edge, self.start_frac,
                    self.graph.edges[edge].head, pos,
                )
            return CutPoint(max(t, self.depart_s), 0.0, None, 0.0, self.start_node, pos)
        if t >= self.arrival_s:
            last = self.edges[-1] if self.edges else None
            node = self.end_node
            return CutPoint(
                t, self.total_length_m, last, 1.0 if last is not None else 0.0,
                node, self.graph.node_latlon(node),
            )
        i = self._segment_index_at(t)
        s = self.segments[i]
        if s.edge is None:
            prev = self.segments[i - 1].edge if i > 0 else None
            if prev is None:
                return CutPoint(t, s.d0, None, 0.0, self.start_node, s.a)
            return CutPoint(t, s.d0, prev, 1.0, self.graph.edges[prev].head, s.a)
        u = min(max((t - s.t0) / (s.t1 - s.t0), 0.0), 1.0)
        frac = s.frac0 + (s.frac1 - s.frac0) * u
        dist = s.d0 + (s.d1 - s.d0) * u
        return CutPoint(
            t, dist, s.edge, frac, self.graph.edges[s.edge].head, interpolate(*s.a, *s.b, u)
        )
