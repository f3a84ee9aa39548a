"""Graph validation, closure masks, and shortest-path travel times."""

from __future__ import annotations

import numpy as np
import pytest

from surgeaccess import access, hazard, network
from surgeaccess.errors import InvalidInputError, ValidationError


def mk_nodes(coords):
    return [network.Node(f"n{i:02d}", float(x), float(y)) for i, (x, y) in enumerate(coords)]


def road(eid, u, v, length, speed=1.0, h_r=0.0):
    return network.Edge(eid, u, v, length_m=length, speed_mps=speed, kind=network.ROAD, h_r=h_r)


def line_graph(n=4, spacing=60.0):
    """Chain n00 - n01 - ... with 1-minute hops."""
    nodes = mk_nodes([(i * spacing, 0.0) for i in range(n)])
    edges = [road(f"e{i:02d}", f"n{i:02d}", f"n{i + 1:02d}", spacing) for i in range(n - 1)]
    return network.build_graph(nodes, edges, [])


def floyd_warshall_minutes(graph, closed=frozenset()):
    """Dense all-pairs oracle over the same collapsed multigraph."""
    n = len(graph.node_ids)
    pos = {nid: i for i, nid in enumerate(graph.node_ids)}
    dist = np.full((n, n), np.inf)
    np.fill_diagonal(dist, 0.0)
    for eid in graph.edge_ids:
        if eid in closed:
            continue
        e = graph.edges[eid]
        i, j = pos[e.u], pos[e.v]
        if e.minutes < dist[i, j]:
            dist[i, j] = dist[j, i] = e.minutes
    for k in range(n):
        np.minimum(dist, dist[:, k, None] + dist[None, k, :], out=dist)
    return dist


def random_sited_graph(rng, max_nodes=20):
    """Connected-ish random graph with integer-minute edges and sites on nodes."""
    n = int(rng.integers(4, max_nodes + 1))
    coords = rng.uniform(0, 10_000, size=(n, 2))
    coords = np.unique(np.round(coords, 1), axis=0)
    n = coords.shape[0]
    nodes = mk_nodes(coords)
    edges = []
    for i in range(1, n):  # random spanning tree keeps most pairs reachable
        j = int(rng.integers(0, i))
        edges.append(road(f"t{i:03d}", nodes[i].node_id, nodes[j].node_id, 60.0 * int(rng.integers(1, 30))))
    for k in range(int(rng.integers(0, 2 * n))):
        i, j = rng.integers(0, n, size=2)
        if i == j:
            continue
        edges.append(road(f"x{k:03d}", nodes[i].node_id, nodes[j].node_id, 60.0 * int(rng.integers(1, 30))))
    graph = network.build_graph(nodes, edges, [])
    pos = {nid: k for k, nid in enumerate(graph.node_ids)}
    d_nodes = rng.choice(n, size=int(rng.integers(1, max(2, n // 2))), replace=False)
    s_nodes = rng.choice(n, size=int(rng.integers(1, max(2, n // 2))), replace=False)
    demands = [
        access.DemandSite(f"d{k}", graph.nodes[graph.node_ids[i]].x, graph.nodes[graph.node_ids[i]].y, 1.0)
        for k, i in enumerate(pos[nodes[i].node_id] for i in d_nodes)
    ]
    supplies = [
        access.SupplySite(f"s{k}", graph.nodes[graph.node_ids[i]].x, graph.nodes[graph.node_ids[i]].y, 1.0)
        for k, i in enumerate(pos[nodes[i].node_id] for i in s_nodes)
    ]
    d_idx = [pos[nodes[i].node_id] for i in d_nodes]
    s_idx = [pos[nodes[i].node_id] for i in s_nodes]
    return graph, demands, supplies, d_idx, s_idx


def test_minutes_from_length_and_speed():
    e = road("e", "a", "b", length=600.0, speed=2.0)
    assert e.minutes == 5.0


def test_build_graph_reports_every_problem_at_once():
    nodes = mk_nodes([(0, 0), (60, 0)]) + [network.Node("n00", 5.0, 5.0)]
    edges = [
        road("dup", "n00", "n01", 60.0),
        road("dup", "n00", "n01", 60.0),
        road("loop", "n00", "n00", 60.0),
        road("ghost", "n00", "zz", 60.0),
        road("short", "n00", "n01", 0.0),
        road("slow", "n00", "n01", 60.0, speed=0.0),
        network.Edge("kind", "n00", "n01", 60.0, 1.0, kind="tunnel"),
        network.Edge("nobr", "n00", "n01", 60.0, 1.0, kind=network.BRIDGE),
        network.Edge("unkbr", "n00", "n01", 60.0, 1.0, kind=network.BRIDGE, bridge_id="nope"),
        network.Edge("roadbr", "n00", "n01", 60.0, 1.0, kind=network.ROAD, bridge_id="b1", h_r=0.0),
        network.Edge("dry", "n00", "n01", 60.0, 1.0, kind=network.ROAD),
    ]
    bridges = [
        network.BridgeRecord("b1", 5.0, 12.0, 0, 0),
        network.BridgeRecord("b1", 5.0, 12.0, 0, 0),
        network.BridgeRecord("heavy", 5.0, 99.0, 0, 0),
        network.BridgeRecord("orphan", 5.0, 12.0, 0, 0),
    ]
    with pytest.raises(ValidationError) as err:
        network.build_graph(nodes, edges, bridges)
    text = "\n".join(err.value.errors)
    for fragment in (
        "duplicate node id n00",
        "duplicate edge id dup",
        "self-loop",
        "unknown endpoint node zz",
        "length must be finite and > 0",
        "speed must be finite and > 0",
        "unknown kind 'tunnel'",
        "bridge edge without bridge_id",
        "unknown bridge nope",
        "road edge carries bridge_id b1",
        "needs a finite lowest elevation",
        "duplicate bridge id b1",
        "mass 99.0 ton/m outside supported range",
        "orphan: no edge references it",
    ):
        assert fragment in text, fragment
    assert len(err.value.errors) >= 14


def test_mass_domain_boundaries():
    nodes = mk_nodes([(0, 0), (60, 0)])
    mk = lambda mass: network.build_graph(
        nodes,
        [network.Edge("e", "n00", "n01", 60.0, 1.0, kind=network.BRIDGE, bridge_id="b")],
        [network.BridgeRecord("b", 5.0, mass, 30.0, 0.0)],
    )
    assert mk(35.0).bridges["b"].mass_ton_per_m == 35.0
    for mass in (0.0, -3.0, 35.1):
        with pytest.raises(ValidationError):
            mk(mass)


def test_component_count():
    nodes = mk_nodes([(0, 0), (60, 0), (500, 500), (560, 500)])
    edges = [road("e0", "n00", "n01", 60.0), road("e1", "n02", "n03", 60.0)]
    graph = network.build_graph(nodes, edges, [])
    assert graph.component_count == 2
    assert line_graph(5).component_count == 1


def test_nearest_nodes_tie_breaks_to_lowest_id():
    graph = line_graph(3)  # nodes at x = 0, 60, 120
    idx = graph.nearest_nodes([30.0], [0.0])  # equidistant n00 / n01
    assert graph.node_ids[idx[0]] == "n00"


def test_road_and_bridge_sites():
    nodes = mk_nodes([(0, 0), (60, 0)])
    edges = [
        network.Edge("br", "n00", "n01", 60.0, 1.0, kind=network.BRIDGE, bridge_id="b"),
        road("rd", "n00", "n01", 60.0, h_r=1.25),
    ]
    graph = network.build_graph(nodes, edges, [network.BridgeRecord("b", 7.0, 12.0, 30.0, 0.0)])
    assert graph.bridge_sites() == [("b", 7.0, 30.0, 0.0)]
    assert graph.road_sites() == [("rd", 1.25, 30.0, 0.0)]
    assert graph.edges_for_bridge("b") == ("br",)
    assert graph.edges_for_bridge("zz") == ()


def spanned_graph():
    """Two-span bridge crossing plus a dry detour road."""
    nodes = mk_nodes([(0, 0), (60, 0), (120, 0), (0, 60), (120, 60)])
    edges = [
        network.Edge("s1", "n00", "n01", 60.0, 1.0, kind=network.BRIDGE, bridge_id="b"),
        network.Edge("s2", "n01", "n02", 60.0, 1.0, kind=network.BRIDGE, bridge_id="b"),
        road("r1", "n00", "n03", 60.0, h_r=2.0),
        road("r2", "n03", "n04", 120.0, h_r=0.2),
        road("r3", "n04", "n02", 60.0, h_r=2.0),
    ]
    graph = network.build_graph(nodes, edges, [network.BridgeRecord("b", 5.0, 12.0, 60.0, 0.0)])
    field = hazard.SurgeField([0.0], [0.0], [1.0], [0.5])  # uniform modest surge
    exposures = hazard.evaluate_exposures(field, graph.bridge_sites(), graph.road_sites())
    return graph, exposures


def test_closure_mask_horizons_and_provenance():
    graph, exposures = spanned_graph()
    thresholds = hazard.ExposureThresholds()
    # surge 1.0 over r2 (h_r 0.2) floods it; bridge deck at 5.0 stays clear
    assert exposures.road_depth["r2"] == pytest.approx(0.8)
    assert exposures.bridges["b"].z_c == pytest.approx(4.0)

    intact = {"b": False}
    failed = {"b": True}
    assert network.closure_mask(graph, exposures, thresholds, intact, "long").closed_edges == frozenset()
    short = network.closure_mask(graph, exposures, thresholds, intact, "short")
    assert short.provenance == {"r2": network.INUNDATION}
    long_failed = network.closure_mask(graph, exposures, thresholds, failed, "long")
    assert long_failed.provenance == {"s1": network.STRUCTURAL, "s2": network.STRUCTURAL}
    short_failed = network.closure_mask(graph, exposures, thresholds, failed, "short")
    assert short_failed.provenance == {
        "s1": network.STRUCTURAL,
        "s2": network.STRUCTURAL,
        "r2": network.INUNDATION,
    }


def test_structural_label_wins_over_inundation():
    graph, _ = spanned_graph()
    # drown the bridge deck so inundation would also close it
    field = hazard.SurgeField([0.0], [0.0], [6.0], [0.5])
    exposures = hazard.evaluate_exposures(field, graph.bridge_sites(), graph.road_sites())
    thresholds = hazard.ExposureThresholds()
    mask = network.closure_mask(graph, exposures, thresholds, {"b": True}, "short")
    assert mask.provenance["s1"] == network.STRUCTURAL
    mask = network.closure_mask(graph, exposures, thresholds, {"b": False}, "short")
    assert mask.provenance["s1"] == network.INUNDATION


def test_short_mask_is_union_of_structural_and_inundation():
    graph, exposures = spanned_graph()
    thresholds = hazard.ExposureThresholds()
    for draw in ({"b": False}, {"b": True}):
        short = network.closure_mask(graph, exposures, thresholds, draw, "short")
        long = network.closure_mask(graph, exposures, thresholds, draw, "long")
        flood_only = network.closure_mask(graph, exposures, thresholds, {"b": False}, "short")
        assert short.closed_edges == long.closed_edges | flood_only.closed_edges


def test_closure_mask_input_errors():
    graph, exposures = spanned_graph()
    thresholds = hazard.ExposureThresholds()
    with pytest.raises(InvalidInputError, match="unknown horizon"):
        network.closure_mask(graph, exposures, thresholds, {"b": False}, "decade")
    with pytest.raises(InvalidInputError, match="missing bridge"):
        network.closure_mask(graph, exposures, thresholds, {}, "short")
    with pytest.raises(InvalidInputError, match="unknown bridge"):
        network.closure_mask(graph, exposures, thresholds, {"b": False, "zz": True}, "short")
    bare = hazard.ExposureSet(bridges={}, road_depth={})
    with pytest.raises(InvalidInputError, match="exposures missing"):
        network.closure_mask(graph, bare, thresholds, {"b": False}, "short")
    wrong_edge = hazard.ExposureSet(bridges=exposures.bridges, road_depth={"s1": 0.0})
    with pytest.raises(InvalidInputError, match="unknown road edge"):
        network.closure_mask(graph, wrong_edge, thresholds, {"b": False}, "short")


def test_roads_absent_from_exposures_treated_dry():
    graph, exposures = spanned_graph()
    partial = hazard.ExposureSet(bridges=exposures.bridges, road_depth={})
    mask = network.closure_mask(graph, partial, hazard.ExposureThresholds(), {"b": False}, "short")
    assert mask.closed_edges == frozenset()


def test_parallel_edges_use_the_fastest_open_one():
    nodes = mk_nodes([(0, 0), (600, 0)])
    edges = [
        road("fast", "n00", "n01", 600.0, speed=10.0),  # 1 minute
        road("slow", "n00", "n01", 600.0, speed=1.0),   # 10 minutes
    ]
    graph = network.build_graph(nodes, edges, [])
    demands = [access.DemandSite("d", 0.0, 0.0, 1.0)]
    supplies = [access.SupplySite("s", 600.0, 0.0, 1.0)]
    open_table = network.travel_time_table(graph, None, demands, supplies, 50.0)
    assert open_table.get("d", "s") == 1.0
    masked = network.travel_time_table(
        graph, network.ClosureMask({"fast": network.INUNDATION}), demands, supplies, 50.0
    )
    assert masked.get("d", "s") == 10.0
    both = network.ClosureMask({"fast": network.INUNDATION, "slow": network.INUNDATION})
    assert network.travel_time_table(graph, both, demands, supplies, 50.0).get("d", "s") is None


def test_catchment_boundary_inclusive():
    graph = line_graph(3)  # two 1-minute hops
    demands = [access.DemandSite("d", 0.0, 0.0, 1.0)]
    supplies = [access.SupplySite("s", 120.0, 0.0, 1.0)]
    at_limit = network.travel_time_table(graph, None, demands, supplies, d0_minutes=2.0)
    assert at_limit.get("d", "s") == 2.0
    below = network.travel_time_table(graph, None, demands, supplies, d0_minutes=1.999)
    assert below.get("d", "s") is None
    assert len(below) == 0


def test_matches_floyd_warshall_oracle():
    rng = np.random.default_rng(99)
    for trial in range(25):
        graph, demands, supplies, d_idx, s_idx = random_sited_graph(rng)
        closed = frozenset(
            eid for eid in graph.edge_ids if rng.random() < (0.0 if trial % 3 == 0 else 0.25)
        )
        mask = network.ClosureMask({eid: network.STRUCTURAL for eid in closed})
        d0 = float(rng.integers(5, 80))
        table = network.travel_time_table(graph, mask, demands, supplies, d0)
        oracle = floyd_warshall_minutes(graph, closed)
        for k, d in enumerate(demands):
            for m, s in enumerate(supplies):
                want = oracle[d_idx[k], s_idx[m]]
                got = table.get(d.demand_id, s.supply_id)
                if want <= d0:
                    assert got == want  # integer minutes, exact equality
                else:
                    assert got is None


def test_travel_table_deterministic_under_input_order():
    rng = np.random.default_rng(7)
    graph, demands, supplies, _, _ = random_sited_graph(rng)
    nodes = list(graph.nodes.values())
    edges = list(graph.edges.values())
    rng.shuffle(nodes)
    rng.shuffle(edges)
    shuffled = network.build_graph(nodes, edges, [])
    a = network.travel_time_table(graph, None, demands, supplies, 30.0)
    b = network.travel_time_table(shuffled, None, demands, supplies, 30.0)
    assert a == b


def test_travel_table_validation():
    graph = line_graph(3)
    demands = [access.DemandSite("d", 0.0, 0.0, 1.0)]
    supplies = [access.SupplySite("s", 120.0, 0.0, 1.0)]
    with pytest.raises(InvalidInputError, match="d0"):
        network.travel_time_table(graph, None, demands, supplies, 0.0)
    with pytest.raises(InvalidInputError, match="duplicate demand"):
        network.travel_time_table(graph, None, demands * 2, supplies, 10.0)
    with pytest.raises(InvalidInputError, match="snapped"):
        network.travel_time_table(
            graph, None, demands, supplies, 10.0,
            snapped=(np.array([0, 1]), np.array([2])),
        )
    empty = network.travel_time_table(graph, None, [], supplies, 10.0)
    assert len(empty) == 0 and empty.demand_ids == ()


def test_table_rejects_out_of_range_minutes():
    with pytest.raises(InvalidInputError, match="minutes"):
        network.TravelTimeTable(("d",), ("s",), np.array([0]), np.array([0]), np.array([51.0]), 50.0)
    with pytest.raises(InvalidInputError, match="minutes"):
        network.TravelTimeTable(("d",), ("s",), np.array([0]), np.array([0]), np.array([-0.1]), 50.0)
    with pytest.raises(InvalidInputError, match="share one shape"):
        network.TravelTimeTable(("d",), ("s",), np.array([0, 0]), np.array([0]), np.array([1.0]), 50.0)


def test_snapped_shortcut_matches_fresh_snapping():
    rng = np.random.default_rng(11)
    graph, demands, supplies, _, _ = random_sited_graph(rng)
    snapped = (network.snap_sites(graph, demands), network.snap_sites(graph, supplies))
    a = network.travel_time_table(graph, None, demands, supplies, 40.0)
    b = network.travel_time_table(graph, None, demands, supplies, 40.0, snapped=snapped)
    assert a == b
