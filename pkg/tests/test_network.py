"""Network model: loading, integrity checks, map matching, profiles."""

from __future__ import annotations

import json
import random

import pytest

from hailsim import fixtures
from hailsim.geo import haversine_m
from hailsim.network import (
    NetworkError,
    RoadGraph,
    SpeedProfile,
    TurnCostModel,
    load_network,
    nearest_node,
    nearest_node_index,
    turn_penalties_from_geometry,
)

from builders import latlon, make_graph
from reference import linear_nearest


def _ring_file(tmp_path, mutate=None):
    corners = [latlon(0, 0), latlon(100, 0), latlon(100, 100), latlon(0, 100)]
    data = {
        "nodes": [
            {"id": i, "lat": lat, "lon": lon} for i, (lat, lon) in enumerate(corners)
        ],
        "edges": [
            {"id": i, "from": i, "to": (i + 1) % 4, "length_m": 100.0, "speed_mps": 10.0}
            for i in range(4)
        ],
    }
    if mutate:
        mutate(data)
    path = tmp_path / "net.json"
    path.write_text(json.dumps(data))
    return path


def test_load_four_node_ring(tmp_path):
    graph = load_network(_ring_file(tmp_path))
    assert graph.n_nodes == 4
    assert graph.n_edges == 4
    assert graph.component_count == 1


def test_load_rejects_unknown_node_reference(tmp_path):
    def mutate(data):
        data["edges"][2]["to"] = 99

    with pytest.raises(NetworkError, match="edge 2"):
        load_network(_ring_file(tmp_path, mutate))


def test_load_rejects_duplicate_edge_id(tmp_path):
    def mutate(data):
        data["edges"][3]["id"] = 0

    with pytest.raises(NetworkError, match="duplicate"):
        load_network(_ring_file(tmp_path, mutate))


def test_load_rejects_zero_length_edge(tmp_path):
    def mutate(data):
        data["edges"][0]["length_m"] = 0.0

    with pytest.raises(NetworkError):
        load_network(_ring_file(tmp_path, mutate))


def test_load_reports_parse_error_line(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n "nodes": [,]\n}')
    with pytest.raises(NetworkError, match="line 2"):
        load_network(path)


def test_disconnected_graph_reports_component_count():
    graph = make_graph(
        {0: (0, 0), 1: (100, 0), 2: (5000, 5000), 3: (5100, 5000)},
        [(0, 1, 100, 10), (1, 0, 100, 10), (2, 3, 100, 10), (3, 2, 100, 10)],
    )
    assert graph.component_count == 2


def test_mini_berlin_shape(graph):
    assert graph.n_nodes == 400
    assert graph.n_edges == 1520
    assert graph.component_count == 1
    assert len(graph.turn_penalties) > 0


def test_network_json_roundtrip(tmp_path, graph):
    path = tmp_path / "mini.json"
    graph.to_json(path)
    back = load_network(path)
    assert back.node_ids == graph.node_ids
    assert [
        (e.edge_id, e.tail, e.head, e.length_m, e.speed_mps) for e in back.edges
    ] == [(e.edge_id, e.tail, e.head, e.length_m, e.speed_mps) for e in graph.edges]
    assert back.turn_penalties == graph.turn_penalties


def test_nearest_node_exact_hit():
    graph = make_graph(
        {0: (0, 0), 1: (100, 0), 2: (0, 100)},
        [(0, 1, 100, 10), (1, 2, 150, 10), (2, 0, 100, 10)],
    )
    lat, lon = latlon(100, 0)
    assert nearest_node(graph, lat, lon) == 1


def test_nearest_node_tie_breaks_to_lowest_id():
    # nodes 3 and 7 equidistant from the probe point
    graph = make_graph(
        {3: (-100, 0), 7: (100, 0), 9: (0, 500)},
        [(3, 7, 200, 10), (7, 9, 200, 10), (9, 3, 200, 10)],
    )
    lat, lon = latlon(0, 0)
    assert nearest_node(graph, lat, lon) == 3


def test_nearest_node_matches_linear_scan(graph):
    points = [(graph.lats[i], graph.lons[i]) for i in range(graph.n_nodes)]
    rng = random.Random(5)
    for _ in range(100):
        lat = rng.uniform(52.48, 52.54)
        lon = rng.uniform(13.37, 13.44)
        assert nearest_node_index(graph, lat, lon) == linear_nearest(points, lat, lon)


def test_turn_penalties_from_geometry_classifies_cross():
    # plus-shaped intersection: center 0, arms north 1, east 2, south 3, west 4
    positions = {0: (0, 0), 1: (0, 200), 2: (200, 0), 3: (0, -200), 4: (-200, 0)}
    arcs = []
    for i, arm in enumerate((1, 2, 3, 4)):
        arcs.append((arm, 0, 200.0, 10.0))
        arcs.append((0, arm, 200.0, 10.0))
    nodes = [(nid, *latlon(x, y)) for nid, (x, y) in sorted(positions.items())]
    edges = [(i, u, v, length, speed) for i, (u, v, length, speed) in enumerate(arcs)]
    model = TurnCostModel()
    penalties = turn_penalties_from_geometry(nodes, edges, model)
    graph = make_graph(positions, arcs, penalties)

    def edge_idx(u, v):
        return next(
            i for i, e in enumerate(graph.edges)
            if e.tail == graph.node_index(u) and e.head == graph.node_index(v)
        )

    south_in = edge_idx(1, 0)     # heading south
    straight = edge_idx(0, 3)     # continue south
    left = edge_idx(0, 2)         # to the east arm = left turn when southbound
    right = edge_idx(0, 4)        # to the west arm = right turn
    back = edge_idx(0, 1)         # u-turn
    assert graph.turn_penalty_s(south_in, straight) == 0.0
    assert graph.turn_penalty_s(south_in, left) == model.left_s
    assert graph.turn_penalty_s(south_in, right) == 0.0
    assert graph.turn_penalty_s(south_in, back) == model.u_turn_s


def test_speed_profile_uniform_and_urban():
    uniform = SpeedProfile.uniform()
    assert uniform.is_uniform
    for hour in (0, 6.3, 12, 23.99):
        assert uniform.factor_at(hour * 3600.0) == 1.0

    urban = fixtures.urban_profile()
    assert not urban.is_uniform
    assert urban.factor_at(3 * 3600.0) == 1.0      # night free flow
    assert urban.factor_at(8 * 3600.0) == 0.7      # morning rush
    assert urban.factor_at(30 * 3600.0) == urban.factor_at(6 * 3600.0)  # wraps daily


def test_speed_profile_validates_factors():
    with pytest.raises(ValueError):
        SpeedProfile([(0.0, 0.0)])
    with pytest.raises(ValueError):
        SpeedProfile([(0.0, 1.2)])
    with pytest.raises(ValueError):
        SpeedProfile([(5.0, 0.9)])  # does not cover from midnight


def test_speed_profile_json_roundtrip(tmp_path):
    urban = fixtures.urban_profile()
    path = tmp_path / "profile.json"
    urban.to_json(path)
    back = SpeedProfile.from_json(path)
    for hour in (0, 7, 8.25, 16, 22):
        assert back.factor_at(hour * 3600.0) == urban.factor_at(hour * 3600.0)


def test_grid_coordinates_are_metric():
    # the fixture grid spacing should measure 250 m on the ground
    a = fixtures._node_latlon(5, 5)
    b = fixtures._node_latlon(5, 6)
    c = fixtures._node_latlon(6, 5)
    assert haversine_m(*a, *b) == pytest.approx(250.0, rel=0.01)
    assert haversine_m(*a, *c) == pytest.approx(250.0, rel=0.01)
