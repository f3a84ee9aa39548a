"""Road and bridge network: validation, closure masks, travel times.

The network is an undirected multigraph. Nodes are planar points, edges
carry an authoritative length and free-flow speed, and bridge edges point
at a bridge record that holds deck elevation and superstructure mass.
Travel times are free-flow minutes; anything beyond the catchment radius
d0 is treated as unreachable.

Shortest paths run on a compressed-sparse matrix via scipy's Dijkstra.
Parallel edges between the same node pair are collapsed to the fastest
open one before routing, because sparse construction would otherwise sum
their weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra

from . import hazard
from .errors import InvalidInputError, ValidationError

ROAD = "road"
BRIDGE = "bridge"
EDGE_KINDS = (ROAD, BRIDGE)

SHORT_TERM = "short"
LONG_TERM = "long"
HORIZONS = (SHORT_TERM, LONG_TERM)

# Closure provenance labels. Structural wins when both apply.
STRUCTURAL = "structural"
INUNDATION = "inundation"


@dataclass(frozen=True)
class Node:
    node_id: str
    x: float
    y: float


@dataclass(frozen=True)
class Edge:
    """One traversable segment. h_r is the lowest elevation of a road
    segment; bridge edges carry a bridge_id instead."""

    edge_id: str
    u: str
    v: str
    length_m: float
    speed_mps: float
    kind: str
    bridge_id: str | None = None
    h_r: float | None = None

    @property
    def minutes(self) -> float:
        return self.length_m / self.speed_mps / 60.0


@dataclass(frozen=True)
class BridgeRecord:
    """Deck elevation and mass per unit length for one bridge."""

    bridge_id: str
    deck_elevation_m: float
    mass_ton_per_m: float
    x: float
    y: float


class RoadGraph:
    """A validated network, immutable after construction.

    Construct through build_graph; the constructor assumes inputs have
    already passed validation.
    """

    def __init__(
        self,
        nodes: dict[str, Node],
        edges: dict[str, Edge],
        bridges: dict[str, BridgeRecord],
    ):
        self.nodes = nodes
        self.edges = edges
        self.bridges = bridges

        self.node_ids: tuple[str, ...] = tuple(sorted(nodes))
        self._node_pos = {nid: i for i, nid in enumerate(self.node_ids)}
        self._node_x = np.array([nodes[nid].x for nid in self.node_ids], dtype=float)
        self._node_y = np.array([nodes[nid].y for nid in self.node_ids], dtype=float)

        self.edge_ids: tuple[str, ...] = tuple(sorted(edges))
        self._edge_pos = {eid: i for i, eid in enumerate(self.edge_ids)}
        self._edge_u = np.array([self._node_pos[edges[eid].u] for eid in self.edge_ids], dtype=np.int64)
        self._edge_v = np.array([self._node_pos[edges[eid].v] for eid in self.edge_ids], dtype=np.int64)
        self._edge_minutes = np.array([edges[eid].minutes for eid in self.edge_ids], dtype=float)

        self._edges_by_bridge: dict[str, tuple[str, ...]] = {}
        for eid in self.edge_ids:
            edge = edges[eid]
            if edge.kind == BRIDGE and edge.bridge_id is not None:
                cur = self._edges_by_bridge.get(edge.bridge_id, ())
                self._edges_by_bridge[edge.bridge_id] = cur + (eid,)

        self.component_count = int(
            connected_components(self._adjacency(frozenset()), directed=False, return_labels=False)
        )

    def _adjacency(self, closed_edge_ids: frozenset[str]) -> csr_matrix:
        """Upper-triangle sparse minutes matrix with closed edges removed."""
        n = len(self.node_ids)
        if closed_edge_ids:
            keep = np.array([eid not in closed_edge_ids for eid in self.edge_ids], dtype=bool)
            u, v, w = self._edge_u[keep], self._edge_v[keep], self._edge_minutes[keep]
        else:
            u, v, w = self._edge_u, self._edge_v, self._edge_minutes
        lo = np.minimum(u, v)
        hi = np.maximum(u, v)
        key = lo * n + hi
        order = np.argsort(key, kind="stable")
        key, w = key[order], w[order]
        starts = np.flatnonzero(np.r_[True, key[1:] != key[:-1]]) if key.size else np.array([], dtype=np.int64)
        if key.size:
            w_min = np.minimum.reduceat(w, starts)
            key_u = key[starts]
        else:
            w_min = w
            key_u = key
        return csr_matrix((w_min, (key_u // n, key_u % n)), shape=(n, n))

    def edges_for_bridge(self, bridge_id: str) -> tuple[str, ...]:
        return self._edges_by_bridge.get(bridge_id, ())

    def nearest_nodes(self, xs: Sequence[float] | np.ndarray, ys: Sequence[float] | np.ndarray) -> np.ndarray:
        """Index (into node_ids) of the nearest node per query point.

        Ties resolve to the lowest node id because node arrays are sorted
        by id and argmin keeps the first minimum.
        """
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if xs.shape != ys.shape or xs.ndim != 1:
            raise InvalidInputError("query coordinates must be 1-d arrays of equal length")
        if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
            raise InvalidInputError("query coordinates must be finite")
        out = np.empty(xs.shape[0], dtype=np.int64)
        chunk = max(1, 2_000_000 // max(len(self.node_ids), 1))
        for start in range(0, xs.shape[0], chunk):
            end = min(start + chunk, xs.shape[0])
            d2 = (xs[start:end, None] - self._node_x[None, :]) ** 2 + (ys[start:end, None] - self._node_y[None, :]) ** 2
            out[start:end] = np.argmin(d2, axis=1)
        return out

    def bridge_sites(self) -> list[tuple[str, float, float, float]]:
        """(bridge_id, deck_elevation_m, x, y) rows, sorted by id."""
        return [
            (bid, self.bridges[bid].deck_elevation_m, self.bridges[bid].x, self.bridges[bid].y)
            for bid in sorted(self.bridges)
        ]

    def road_sites(self) -> list[tuple[str, float, float, float]]:
        """(edge_id, h_r, midpoint x, midpoint y) rows for road edges."""
        rows = []
        for eid in self.edge_ids:
            edge = self.edges[eid]
            if edge.kind != ROAD:
                continue
            a, b = self.nodes[edge.u], self.nodes[edge.v]
            rows.append((eid, float(edge.h_r), (a.x + b.x) / 2.0, (a.y + b.y) / 2.0))
        return rows


def build_graph(
    nodes: Iterable[Node],
    edges: Iterable[Edge],
    bridges: Iterable[BridgeRecord],
) -> RoadGraph:
    """Validate and assemble a RoadGraph, reporting every failure at once."""
    errors: list[str] = []

    node_map: dict[str, Node] = {}
    for node in nodes:
        if node.node_id in node_map:
            errors.append(f"duplicate node id {node.node_id}")
            continue
        if not (math.isfinite(node.x) and math.isfinite(node.y)):
            errors.append(f"node {node.node_id}: non-finite coordinates")
            continue
        node_map[node.node_id] = node
    if not node_map and not errors:
        errors.append("network has no nodes")

    bridge_map: dict[str, BridgeRecord] = {}
    for rec in bridges:
        if rec.bridge_id in bridge_map:
            errors.append(f"duplicate bridge id {rec.bridge_id}")
            continue
        bad = [
            name
            for name in ("deck_elevation_m", "mass_ton_per_m", "x", "y")
            if not math.isfinite(getattr(rec, name))
        ]
        if bad:
            errors.append(f"bridge {rec.bridge_id}: non-finite {', '.join(bad)}")
            continue
        if not 0.0 < rec.mass_ton_per_m <= 35.0:
            errors.append(
                f"bridge {rec.bridge_id}: mass {rec.mass_ton_per_m} ton/m outside supported range (0, 35]"
            )
            continue
        bridge_map[rec.bridge_id] = rec

    edge_map: dict[str, Edge] = {}
    referenced_bridges: set[str] = set()
    for edge in edges:
        ok = True
        if edge.edge_id in edge_map:
            errors.append(f"duplicate edge id {edge.edge_id}")
            continue
        for endpoint in (edge.u, edge.v):
            if endpoint not in node_map:
                errors.append(f"edge {edge.edge_id}: unknown endpoint node {endpoint}")
                ok = False
        if edge.u == edge.v:
            errors.append(f"edge {edge.edge_id}: self-loop at node {edge.u}")
            ok = False
        if not (math.isfinite(edge.length_m) and edge.length_m > 0.0):
            errors.append(f"edge {edge.edge_id}: length must be finite and > 0, got {edge.length_m}")
            ok = False
        if not (math.isfinite(edge.speed_mps) and edge.speed_mps > 0.0):
            errors.append(f"edge {edge.edge_id}: speed must be finite and > 0, got {edge.speed_mps}")
            ok = False
        if edge.kind not in EDGE_KINDS:
            errors.append(f"edge {edge.edge_id}: unknown kind {edge.kind!r}")
            ok = False
        elif edge.kind == BRIDGE:
            if edge.bridge_id is None:
                errors.append(f"edge {edge.edge_id}: bridge edge without bridge_id")
                ok = False
            elif edge.bridge_id not in bridge_map:
                errors.append(f"edge {edge.edge_id}: unknown bridge {edge.bridge_id}")
                ok = False
            else:
                referenced_bridges.add(edge.bridge_id)
        else:
            if edge.bridge_id is not None:
                errors.append(f"edge {edge.edge_id}: road edge carries bridge_id {edge.bridge_id}")
                ok = False
            if edge.h_r is None or not math.isfinite(edge.h_r):
                errors.append(f"edge {edge.edge_id}: road edge needs a finite lowest elevation h_r")
                ok = False
        if ok:
            edge_map[edge.edge_id] = edge

    for bid in sorted(bridge_map):
        if bid not in referenced_bridges:
            errors.append(f"bridge {bid}: no edge references it")

    if errors:
        raise ValidationError(errors)
    return RoadGraph(node_map, edge_map, bridge_map)


@dataclass(frozen=True)
class ClosureMask:
    """Closed edges with the reason each one closed."""

    provenance: Mapping[str, str]

    @property
    def closed_edges(self) -> frozenset[str]:
        return frozenset(self.provenance)

    def __len__(self) -> int:
        return len(self.provenance)

    def __contains__(self, edge_id: str) -> bool:
        return edge_id in self.provenance


OPEN_MASK = ClosureMask(provenance={})


def closure_mask(
    graph: RoadGraph,
    exposures: hazard.ExposureSet,
    thresholds: hazard.ExposureThresholds,
    failure_draw: Mapping[str, bool],
    horizon: str,
) -> ClosureMask:
    """Closed edge set for one sampled storm outcome.

    Structural failures close a bridge's edges on both horizons. The
    short horizon also closes inundated bridges and flooded roads; the
    long horizon keeps them open because water recedes but collapsed
    decks stay collapsed. Road edges missing from the exposure map are
    treated as dry.
    """
    if horizon not in HORIZONS:
        raise InvalidInputError(f"unknown horizon {horizon!r}; expected one of {HORIZONS}")
    unknown = sorted(set(failure_draw) - set(graph.bridges))
    if unknown:
        raise InvalidInputError(f"failure draw names unknown bridge(s): {', '.join(unknown)}")
    missing = sorted(set(graph.bridges) - set(failure_draw))
    if missing:
        raise InvalidInputError(f"failure draw missing bridge(s): {', '.join(missing)}")
    missing = sorted(set(graph.bridges) - set(exposures.bridges))
    if missing:
        raise InvalidInputError(f"exposures missing bridge(s): {', '.join(missing)}")
    for eid in exposures.road_depth:
        edge = graph.edges.get(eid)
        if edge is None or edge.kind != ROAD:
            raise InvalidInputError(f"road exposure names unknown road edge {eid}")

    closed: dict[str, str] = {}
    for bid in sorted(graph.bridges):
        if failure_draw[bid]:
            for eid in graph.edges_for_bridge(bid):
                closed[eid] = STRUCTURAL
    if horizon == SHORT_TERM:
        for bid in sorted(graph.bridges):
            exp = exposures.bridges[bid]
            if hazard.bridge_inundation_closed(exp.z_c, thresholds):
                for eid in graph.edges_for_bridge(bid):
                    closed.setdefault(eid, INUNDATION)
        for eid in sorted(exposures.road_depth):
            if hazard.road_inundation_closed(exposures.road_depth[eid], thresholds):
                closed.setdefault(eid, INUNDATION)
    return ClosureMask(provenance=closed)


class TravelTimeTable:
    """Sparse demand-to-supply free-flow minutes within the catchment.

    Entries exist only for pairs whose shortest path is <= d0 minutes;
    absence means unreachable for scoring purposes. Arrays are sorted by
    (demand position, supply position) against the id tuples stored here.
    """

    __slots__ = ("demand_ids", "supply_ids", "demand_index", "supply_index", "minutes", "d0_minutes", "_lookup")

    def __init__(
        self,
        demand_ids: tuple[str, ...],
        supply_ids: tuple[str, ...],
        demand_index: np.ndarray,
        supply_index: np.ndarray,
        minutes: np.ndarray,
        d0_minutes: float,
    ):
        if not (math.isfinite(d0_minutes) and d0_minutes > 0.0):
            raise InvalidInputError(f"d0 must be finite and > 0, got {d0_minutes}")
        demand_index = np.asarray(demand_index, dtype=np.int64)
        supply_index = np.asarray(supply_index, dtype=np.int64)
        minutes = np.asarray(minutes, dtype=float)
        if not (demand_index.shape == supply_index.shape == minutes.shape):
            raise InvalidInputError("table arrays must share one shape")
        if minutes.size and (np.min(minutes) < 0.0 or np.max(minutes) > d0_minutes):
            raise InvalidInputError("table minutes must lie in [0, d0]")
        order = np.lexsort((supply_index, demand_index))
        self.demand_ids = demand_ids
        self.supply_ids = supply_ids
        self.demand_index = demand_index[order]
        self.supply_index = supply_index[order]
        self.minutes = minutes[order]
        self.d0_minutes = float(d0_minutes)
        self._lookup: dict[tuple[str, str], float] | None = None

    def __len__(self) -> int:
        return int(self.minutes.shape[0])

    def items(self):
        """((demand_id, supply_id), minutes) pairs in deterministic order."""
        for d, s, t in zip(self.demand_index, self.supply_index, self.minutes):
            yield (self.demand_ids[d], self.supply_ids[s]), float(t)

    def get(self, demand_id: str, supply_id: str) -> float | None:
        if self._lookup is None:
            self._lookup = {key: t for key, t in self.items()}
        return self._lookup.get((demand_id, supply_id))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TravelTimeTable):
            return NotImplemented
        return (
            self.demand_ids == other.demand_ids
            and self.supply_ids == other.supply_ids
            and self.d0_minutes == other.d0_minutes
            and np.array_equal(self.demand_index, other.demand_index)
            and np.array_equal(self.supply_index, other.supply_index)
            and np.array_equal(self.minutes, other.minutes)
        )


def snap_sites(graph: RoadGraph, sites: Sequence) -> np.ndarray:
    """Nearest network node (index into graph.node_ids) per site."""
    if not sites:
        return np.array([], dtype=np.int64)
    return graph.nearest_nodes([s.x for s in sites], [s.y for s in sites])


def travel_time_table(
    graph: RoadGraph,
    mask: ClosureMask | None,
    demands: Sequence,
    supplies: Sequence,
    d0_minutes: float,
    *,
    snapped: tuple[np.ndarray, np.ndarray] | None = None,
) -> TravelTimeTable:
    """All demand-supply travel times within d0 on the masked network.

    Sites snap to their nearest node first. Dijkstra runs from whichever
    side has fewer sites; the bound makes the search prune anything past
    the catchment. Pass precomputed snap indices through `snapped` when
    calling repeatedly on the same geometry.
    """
    if not (math.isfinite(d0_minutes) and d0_minutes > 0.0):
        raise InvalidInputError(f"d0 must be finite and > 0, got {d0_minutes}")
    demand_ids = tuple(str(d.demand_id) for d in demands)
    supply_ids = tuple(str(s.supply_id) for s in supplies)
    if len(set(demand_ids)) != len(demand_ids):
        raise InvalidInputError("duplicate demand ids")
    if len(set(supply_ids)) != len(supply_ids):
        raise InvalidInputError("duplicate supply ids")

    if snapped is None:
        demand_nodes = snap_sites(graph, demands)
        supply_nodes = snap_sites(graph, supplies)
    else:
        demand_nodes, supply_nodes = snapped
        demand_nodes = np.asarray(demand_nodes, dtype=np.int64)
        supply_nodes = np.asarray(supply_nodes, dtype=np.int64)
        if demand_nodes.shape != (len(demands),) or supply_nodes.shape != (len(supplies),):
            raise InvalidInputError("snapped node arrays do not match the site lists")

    empty = (
        np.array([], dtype=np.int64),
        np.array([], dtype=np.int64),
        np.array([], dtype=float),
    )
    if not demand_ids or not supply_ids:
        return TravelTimeTable(demand_ids, supply_ids, *empty, d0_minutes)

    adjacency = graph._adjacency(mask.closed_edges if mask is not None else frozenset())
    if len(demand_ids) <= len(supply_ids):
        src_nodes, dst_nodes = demand_nodes, supply_nodes
    else:
        src_nodes, dst_nodes = supply_nodes, demand_nodes
    unique_src, src_row = np.unique(src_nodes, return_inverse=True)
    dist = dijkstra(adjacency, directed=False, indices=unique_src, limit=d0_minutes)
    pair_minutes = dist[np.ix_(src_row, dst_nodes)]
    if len(demand_ids) > len(supply_ids):
        pair_minutes = pair_minutes.T
    within = pair_minutes <= d0_minutes  # inf fails the comparison
    d_idx, s_idx = np.nonzero(within)
    return TravelTimeTable(
        demand_ids, supply_ids, d_idx, s_idx, pair_minutes[within], d0_minutes
    )
