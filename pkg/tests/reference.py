"""Independent reference implementations used as test oracles.

Everything here is written from first principles with no imports from the
package's algorithmic internals, trading speed for obviousness: exhaustive
enumeration, O(n^2) scans, textbook formulas. Tests compare the fast
implementations against these.
"""

from __future__ import annotations

import math


# --- geometry ---------------------------------------------------------------

EARTH_RADIUS_M = 6_371_000.0


def slow_haversine_m(lat1, lon1, lat2, lon2):
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = math.radians(lat2 - lat1)
    dl = math.radians(lon2 - lon1)
    a = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(math.sqrt(a))


def point_in_polygon(lat, lon, ring):
    """Ray casting against a closed lat/lon ring (list of (lat, lon))."""
    inside = False
    n = len(ring)
    for i in range(n):
        lat1, lon1 = ring[i]
        lat2, lon2 = ring[(i + 1) % n]
        if (lon1 > lon) != (lon2 > lon):
            t = (lon - lon1) / (lon2 - lon1)
            if lat < lat1 + t * (lat2 - lat1):
                inside = not inside
    return inside


# --- routing ----------------------------------------------------------------


def enumerate_edge_simple_costs(graph, origin_idx, dest_idx, factor=1.0, best_bound=None):
    """Minimum path cost by exhaustive search over edge-simple walks.

    Walks may revisit nodes (turn penalties can make that optimal) but not
    edges, which keeps the search finite. Branch-and-bound prunes walks
    already costlier than the best complete one; the bound is admissible
    because every remaining cost term is nonnegative.
    """
    if origin_idx == dest_idx:
        return 0.0
    best = math.inf if best_bound is None else best_bound

    def edge_time(eidx):
        e = graph.edges[eidx]
        return e.length_m / (e.speed_mps * factor)

    def walk(eidx, cost, used):
        nonlocal best
        head = graph.edges[eidx].head
        if head == dest_idx:
            if cost < best:
                best = cost
            return
        for nxt in graph.out_edges[head]:
            if nxt in used:
                continue
            nc = (cost + graph.turn_penalty_s(eidx, nxt)) + edge_time(nxt)
            if nc >= best:
                continue
            used.add(nxt)
            walk(nxt, nc, used)
            used.discard(nxt)

    for first in graph.out_edges[origin_idx]:
        c = edge_time(first)
        if c < best:
            walk(first, c, {first})
    return best


def enumerate_node_simple_costs(graph, origin_idx, dest_idx, factor=1.0):
    """Minimum cost over node-simple paths only (no node revisited).

    A weaker oracle than edge-simple enumeration: with turn penalties the
    true optimum may revisit a node, so this is an upper bound on nothing
    and a lower bound on nothing; it backs the spec'd invariant that the
    router never does worse than any simple path.
    """
    if origin_idx == dest_idx:
        return 0.0
    best = math.inf

    def edge_time(eidx):
        e = graph.edges[eidx]
        return e.length_m / (e.speed_mps * factor)

    def walk(eidx, cost, visited):
        nonlocal best
        head = graph.edges[eidx].head
        if head == dest_idx:
            best = min(best, cost)
            return
        if head in visited or cost >= best:
            return
        visited.add(head)
        for nxt in graph.out_edges[head]:
            walk(nxt, (cost + graph.turn_penalty_s(eidx, nxt)) + edge_time(nxt), visited)
        visited.discard(head)

    for first in graph.out_edges[origin_idx]:
        walk(first, edge_time(first), {origin_idx})
    return best


def node_dijkstra_time(graph, origin_idx, dest_idx, factor=1.0):
    """Textbook node-based Dijkstra ignoring turn penalties."""
    import heapq

    dist = {origin_idx: 0.0}
    heap = [(0.0, origin_idx)]
    while heap:
        c, u = heapq.heappop(heap)
        if c > dist.get(u, math.inf):
            continue
        if u == dest_idx:
            return c
        for eidx in graph.out_edges[u]:
            e = graph.edges[eidx]
            nc = c + e.length_m / (e.speed_mps * factor)
            if nc < dist.get(e.head, math.inf):
                dist[e.head] = nc
                heapq.heappush(heap, (nc, e.head))
    return math.inf


# --- clustering ---------------------------------------------------------------


def quadratic_dbscan(points, eps_m, min_pts):
    """Textbook DBSCAN with O(n^2) brute-force region queries.

    Follows the original pseudocode: scan points in index order, expand
    each unvisited core point with a FIFO seed list (neighbourhoods in
    index order), so border points are claimed by the first cluster whose
    expansion reaches them. Noise is -1.
    """
    n = len(points)

    def region(i):
        return [
            j
            for j in range(n)
            if slow_haversine_m(*points[i], *points[j]) <= eps_m
        ]

    labels = [None] * n  # None = not yet in a cluster and not noise
    visited = [False] * n
    cluster = -1
    for i in range(n):
        if visited[i]:
            continue
        visited[i] = True
        neigh = region(i)
        if len(neigh) < min_pts:
            labels[i] = -1
            continue
        cluster += 1
        labels[i] = cluster
        seeds = [j for j in neigh if j != i]
        k = 0
        while k < len(seeds):
            q = seeds[k]
            k += 1
            if not visited[q]:
                visited[q] = True
                qn = region(q)
                if len(qn) >= min_pts:
                    seeds.extend(qn)
            if labels[q] is None or labels[q] == -1:
                labels[q] = cluster
    return labels


def linear_nearest(points, lat, lon):
    """Index of the closest point by exhaustive scan, lowest index on ties."""
    best, best_d = -1, math.inf
    for i, (plat, plon) in enumerate(points):
        d = slow_haversine_m(lat, lon, plat, plon)
        if d < best_d:
            best, best_d = i, d
    return best
