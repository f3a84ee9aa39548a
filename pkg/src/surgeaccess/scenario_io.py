"""Dataset bundle I/O, deterministic result writers, synthetic fixtures.

A scenario bundle on disk is five data files plus a flat key=value config:

  network.geojson   nodes as Point features, edges as LineString features
  bridges.csv       bridge_id, h_b, mass_ton_per_m, x, y
  surge.csv         x, y, h_st, h_s
  supplies.csv      supply_id, x, y, capacity
  demands.csv       demand_id, x, y, population, then one column per group
  scenario.cfg      storm, crs, datum, thresholds, run parameters

Loading collects every validation failure across all files before raising,
so one round trip reports everything wrong with a bundle. Writers emit
byte-identical files for identical results: fixed key order, repr floats,
no timestamps.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping

import numpy as np

from . import __version__
from .access import DemandSite, SupplySite
from .errors import InvalidInputError, InvalidSpecError, ValidationError
from .fragility import default_table
from .hazard import ExposureThresholds, SurgeField
from .network import BRIDGE, HORIZONS, ROAD, BridgeRecord, Edge, Node, RoadGraph, build_graph
from .simulate import ScenarioConfig, ScenarioResult

NETWORK_FILE = "network.geojson"
BRIDGES_FILE = "bridges.csv"
SURGE_FILE = "surge.csv"
SUPPLIES_FILE = "supplies.csv"
DEMANDS_FILE = "demands.csv"
CONFIG_FILE = "scenario.cfg"

_CONFIG_KEYS = (
    "storm",
    "crs",
    "datum",
    "d0_minutes",
    "samples",
    "seed",
    "horizons",
    "bridge_close_zc",
    "road_close_din",
    "workers",
    "coverage_radius_m",
    "convergence_window",
    "convergence_tolerance",
)


@dataclass(frozen=True)
class BundlePaths:
    network: Path
    bridges: Path
    surge: Path
    supplies: Path
    demands: Path
    config: Path

    @classmethod
    def in_dir(cls, directory: str | Path) -> BundlePaths:
        d = Path(directory)
        return cls(
            network=d / NETWORK_FILE,
            bridges=d / BRIDGES_FILE,
            surge=d / SURGE_FILE,
            supplies=d / SUPPLIES_FILE,
            demands=d / DEMANDS_FILE,
            config=d / CONFIG_FILE,
        )

    def all_files(self) -> tuple[Path, ...]:
        return (self.network, self.bridges, self.surge, self.supplies, self.demands, self.config)


@dataclass
class DatasetBundle:
    """A fully validated scenario dataset plus its run configuration."""

    graph: RoadGraph
    bridges: tuple[BridgeRecord, ...]
    supplies: tuple[SupplySite, ...]
    demands: tuple[DemandSite, ...]
    config: ScenarioConfig
    crs: str
    datum: str
    paths: BundlePaths | None = None
    input_hashes: dict[str, str] = field(default_factory=dict)


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _float_field(rec: Mapping[str, str], name: str) -> float:
    raw = rec.get(name)
    if raw is None or raw == "":
        raise ValueError(f"missing {name}")
    return float(raw)


def _read_csv_rows(path: Path, required: tuple[str, ...], errors: list[str]) -> list[tuple[int, dict[str, str]]]:
    rows: list[tuple[int, dict[str, str]]] = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        missing = [name for name in required if name not in fields]
        if missing:
            errors.append(f"{path.name}: missing column(s) {', '.join(missing)}")
            return rows
        for lineno, rec in enumerate(reader, start=2):
            rows.append((lineno, rec))
    return rows


def _parse_network_geojson(path: Path, errors: list[str]) -> tuple[list[Node], list[Edge]]:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        errors.append(f"{path.name}: not valid JSON ({exc})")
        return [], []
    if not isinstance(doc, dict) or doc.get("type") != "FeatureCollection":
        errors.append(f"{path.name}: expected a GeoJSON FeatureCollection")
        return [], []

    nodes: list[Node] = []
    edge_features: list[tuple[int, dict]] = []
    for i, feat in enumerate(doc.get("features", [])):
        geom = feat.get("geometry") or {}
        props = feat.get("properties") or {}
        gtype = geom.get("type")
        if gtype == "Point":
            try:
                x, y = (float(c) for c in geom["coordinates"])
                nodes.append(Node(node_id=str(props["id"]), x=x, y=y))
            except (KeyError, TypeError, ValueError) as exc:
                errors.append(f"{path.name}: feature {i}: bad node ({exc!r})")
        elif gtype == "LineString":
            edge_features.append((i, feat))
        else:
            errors.append(f"{path.name}: feature {i}: unsupported geometry {gtype!r}")

    # Endpoints bind to nodes by exact coordinates; coincident nodes
    # resolve to the lowest node id.
    coord_to_node: dict[tuple[float, float], str] = {}
    for node in nodes:
        key = (node.x, node.y)
        if key not in coord_to_node or node.node_id < coord_to_node[key]:
            coord_to_node[key] = node.node_id

    edges: list[Edge] = []
    for i, feat in edge_features:
        props = feat.get("properties") or {}
        coords = (feat.get("geometry") or {}).get("coordinates") or []
        try:
            if len(coords) < 2:
                raise ValueError("LineString needs at least two coordinates")
            ends = []
            for cx, cy in (coords[0], coords[-1]):
                key = (float(cx), float(cy))
                if key not in coord_to_node:
                    raise ValueError(f"endpoint {key} matches no node")
                ends.append(coord_to_node[key])
            bridge_id = props.get("bridge_id")
            h_r = props.get("h_r")
            edges.append(
                Edge(
                    edge_id=str(props["id"]),
                    u=ends[0],
                    v=ends[1],
                    length_m=float(props["length_m"]),
                    speed_mps=float(props["speed_mps"]),
                    kind=str(props["kind"]),
                    bridge_id=None if bridge_id is None else str(bridge_id),
                    h_r=None if h_r is None else float(h_r),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            errors.append(f"{path.name}: feature {i}: bad edge ({exc})")
    return nodes, edges


def _parse_bridges_csv(path: Path, errors: list[str]) -> list[BridgeRecord]:
    out: list[BridgeRecord] = []
    for lineno, rec in _read_csv_rows(path, ("bridge_id", "h_b", "mass_ton_per_m", "x", "y"), errors):
        try:
            out.append(
                BridgeRecord(
                    bridge_id=str(rec["bridge_id"]),
                    deck_elevation_m=_float_field(rec, "h_b"),
                    mass_ton_per_m=_float_field(rec, "mass_ton_per_m"),
                    x=_float_field(rec, "x"),
                    y=_float_field(rec, "y"),
                )
            )
        except ValueError as exc:
            errors.append(f"{path.name}:{lineno}: bad bridge row ({exc})")
    return out


def _parse_supplies_csv(path: Path, errors: list[str]) -> list[SupplySite]:
    out: list[SupplySite] = []
    for lineno, rec in _read_csv_rows(path, ("supply_id", "x", "y", "capacity"), errors):
        try:
            out.append(
                SupplySite(
                    supply_id=str(rec["supply_id"]),
                    x=_float_field(rec, "x"),
                    y=_float_field(rec, "y"),
                    capacity=_float_field(rec, "capacity"),
                )
            )
        except (ValueError, InvalidInputError) as exc:
            errors.append(f"{path.name}:{lineno}: bad supply row ({exc})")
    return out


def _parse_demands_csv(path: Path, errors: list[str]) -> list[DemandSite]:
    out: list[DemandSite] = []
    required = ("demand_id", "x", "y", "population")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        missing = [name for name in required if name not in fields]
        if missing:
            errors.append(f"{path.name}: missing column(s) {', '.join(missing)}")
            return out
        group_cols = [name for name in fields if name not in required]
        for lineno, rec in enumerate(reader, start=2):
            try:
                subgroups = {name: _float_field(rec, name) for name in group_cols}
                out.append(
                    DemandSite(
                        demand_id=str(rec["demand_id"]),
                        x=_float_field(rec, "x"),
                        y=_float_field(rec, "y"),
                        population=_float_field(rec, "population"),
                        subgroups=subgroups,
                    )
                )
            except (ValueError, InvalidInputError) as exc:
                errors.append(f"{path.name}:{lineno}: bad demand row ({exc})")
    return out


def parse_config_text(text: str, source: str = CONFIG_FILE) -> tuple[dict[str, str], list[str]]:
    """Parse flat key = value lines; '#' starts a comment."""
    raw: dict[str, str] = {}
    errors: list[str] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            errors.append(f"{source}:{lineno}: expected key = value")
            continue
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key not in _CONFIG_KEYS:
            errors.append(f"{source}:{lineno}: unknown key {key!r}")
            continue
        if key in raw:
            errors.append(f"{source}:{lineno}: duplicate key {key!r}")
            continue
        raw[key] = value
    return raw, errors


def _config_from_raw(
    raw: Mapping[str, str],
    surge_csv: Path,
    errors: list[str],
) -> tuple[ScenarioConfig | None, str, str]:
    """Build the run configuration, reporting every bad value."""

    def get_float(key: str, default: float) -> float:
        if key not in raw:
            return default
        try:
            return float(raw[key])
        except ValueError:
            errors.append(f"{CONFIG_FILE}: {key} must be a number, got {raw[key]!r}")
            return default

    def get_int(key: str, default: int) -> int:
        if key not in raw:
            return default
        try:
            return int(raw[key])
        except ValueError:
            errors.append(f"{CONFIG_FILE}: {key} must be an integer, got {raw[key]!r}")
            return default

    storm = raw.get("storm", "")
    if not storm:
        errors.append(f"{CONFIG_FILE}: storm is required")
    crs = raw.get("crs", "")
    if not crs:
        errors.append(f"{CONFIG_FILE}: crs is required")
    datum = raw.get("datum", "unspecified")

    horizons: tuple[str, ...] = HORIZONS
    if "horizons" in raw:
        horizons = tuple(part.strip() for part in raw["horizons"].split(",") if part.strip())
        for h in horizons:
            if h not in HORIZONS:
                errors.append(f"{CONFIG_FILE}: unknown horizon {h!r}")

    coverage = None
    if raw.get("coverage_radius_m", "") != "":
        coverage = get_float("coverage_radius_m", 0.0)

    before = len(errors)
    d0 = get_float("d0_minutes", 50.0)
    samples = get_int("samples", 1000)
    seed = get_int("seed", 42)
    workers = get_int("workers", 1)
    window = get_int("convergence_window", 100)
    tolerance = get_float("convergence_tolerance", 0.01)
    zc = get_float("bridge_close_zc", -0.6)
    din = get_float("road_close_din", 0.6)
    if errors[before:] or not storm or not crs:
        return None, crs, datum

    try:
        surge = SurgeField.from_csv(surge_csv, datum_label=datum, coverage_radius_m=coverage)
        config = ScenarioConfig(
            storm=storm,
            surge=surge,
            thresholds=ExposureThresholds(bridge_close_zc=zc, road_close_din=din),
            d0_minutes=d0,
            samples=samples,
            seed=seed,
            horizons=horizons,
            workers=workers,
            convergence_window=window,
            convergence_tolerance=tolerance,
        )
    except InvalidInputError as exc:
        errors.append(str(exc))
        return None, crs, datum
    return config, crs, datum


def load_bundle(source: str | Path | BundlePaths) -> DatasetBundle:
    """Load and validate a scenario bundle.

    Missing files raise the underlying OSError; anything wrong with the
    content is collected into one ValidationError listing every failure.
    """
    paths = source if isinstance(source, BundlePaths) else BundlePaths.in_dir(source)
    for path in paths.all_files():
        if not path.exists():
            raise FileNotFoundError(f"missing input file: {path}")

    errors: list[str] = []
    nodes, edges = _parse_network_geojson(paths.network, errors)
    bridges = _parse_bridges_csv(paths.bridges, errors)
    supplies = _parse_supplies_csv(paths.supplies, errors)
    demands = _parse_demands_csv(paths.demands, errors)
    raw_config, cfg_errors = parse_config_text(paths.config.read_text(), paths.config.name)
    errors.extend(cfg_errors)

    graph: RoadGraph | None = None
    try:
        graph = build_graph(nodes, edges, bridges)
    except ValidationError as exc:
        errors.extend(exc.errors)

    seen_supply: set[str] = set()
    for s in supplies:
        if s.supply_id in seen_supply:
            errors.append(f"{SUPPLIES_FILE}: duplicate supply id {s.supply_id}")
        seen_supply.add(s.supply_id)
    seen_demand: set[str] = set()
    for d in demands:
        if d.demand_id in seen_demand:
            errors.append(f"{DEMANDS_FILE}: duplicate demand id {d.demand_id}")
        seen_demand.add(d.demand_id)
    if not supplies:
        errors.append(f"{SUPPLIES_FILE}: no supply sites")
    if not demands:
        errors.append(f"{DEMANDS_FILE}: no demand locations")

    config, crs, datum = _config_from_raw(raw_config, paths.surge, errors)
    if errors:
        raise ValidationError(errors)
    assert graph is not None and config is not None

    return DatasetBundle(
        graph=graph,
        bridges=tuple(sorted(bridges, key=lambda b: b.bridge_id)),
        supplies=tuple(supplies),
        demands=tuple(demands),
        config=config,
        crs=crs,
        datum=datum,
        paths=paths,
        input_hashes={p.name: _sha256_file(p) for p in paths.all_files()},
    )


def _json_dump(obj: Any, path: Path, sort_keys: bool = False) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=sort_keys) + "\n")


def write_results(result: ScenarioResult, bundle: DatasetBundle, out_dir: str | Path) -> dict[str, Path]:
    """Write per-demand GeoJSON per horizon, a group summary CSV and a
    manifest. Output bytes depend only on the result and bundle."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    demand_xy = {d.demand_id: (d.x, d.y) for d in bundle.demands}
    written: dict[str, Path] = {}

    for horizon, hres in result.horizons.items():
        features = []
        for pos, demand_id in enumerate(hres.demand_ids):
            x, y = demand_xy[demand_id]
            features.append(
                {
                    "type": "Feature",
                    "geometry": {"type": "Point", "coordinates": [x, y]},
                    "properties": {
                        "demand_id": demand_id,
                        "mean_score": float(hres.mean_scores[pos]),
                        "cov": float(hres.cov[pos]),
                        "quartile": hres.quartiles[demand_id],
                        "horizon": horizon,
                        "storm": result.storm,
                    },
                }
            )
        path = out / f"results_{horizon}.geojson"
        _json_dump({"type": "FeatureCollection", "features": features}, path)
        written[f"results_{horizon}"] = path

    group_weights: dict[str, float] = {"overall": sum(d.population for d in bundle.demands)}
    for d in bundle.demands:
        for name, w in d.subgroups.items():
            group_weights[name] = group_weights.get(name, 0.0) + float(w)
    summary_path = out / "group_summary.csv"
    with open(summary_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["storm", "horizon", "group", "weight", "average_score"])
        for horizon, hres in result.horizons.items():
            for name in hres.group_averages:
                writer.writerow(
                    [result.storm, horizon, name, repr(group_weights.get(name, 0.0)), repr(hres.group_averages[name])]
                )
    written["group_summary"] = summary_path

    manifest = {
        "storm": result.storm,
        "seed": result.seed,
        "samples": result.samples,
        "d0_minutes": result.d0_minutes,
        "horizons": list(result.horizons),
        "thresholds": {
            "bridge_close_zc": bundle.config.thresholds.bridge_close_zc,
            "road_close_din": bundle.config.thresholds.road_close_din,
        },
        "crs": bundle.crs,
        "datum": bundle.datum,
        "package_version": __version__,
        "fragility_checksum": default_table().checksum(),
        "inputs": dict(sorted(bundle.input_hashes.items())),
        "summary": {
            horizon: {
                "average_score": hres.group_averages["overall"],
                "average_cov": hres.average_cov,
                "no_access_fraction": hres.no_access_fraction,
                "converged_at": hres.converged_at,
            }
            for horizon, hres in result.horizons.items()
        },
    }
    manifest_path = out / "manifest.json"
    _json_dump(manifest, manifest_path, sort_keys=True)
    written["manifest"] = manifest_path
    return written


def read_results(out_dir: str | Path) -> dict[str, Any]:
    """Read back files written by write_results for reporting."""
    out = Path(out_dir)
    manifest = json.loads((out / "manifest.json").read_text())
    horizons: dict[str, dict[str, dict[str, Any]]] = {}
    for horizon in manifest["horizons"]:
        doc = json.loads((out / f"results_{horizon}.geojson").read_text())
        horizons[horizon] = {
            f["properties"]["demand_id"]: f["properties"] for f in doc["features"]
        }
    groups: list[dict[str, str]] = []
    with open(out / "group_summary.csv", newline="") as fh:
        groups = list(csv.DictReader(fh))
    return {"manifest": manifest, "horizons": horizons, "groups": groups}


def write_bundle(bundle: DatasetBundle, out_dir: str | Path) -> BundlePaths:
    """Write a bundle's input files; load_bundle(out_dir) round-trips it."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = BundlePaths.in_dir(out)
    graph = bundle.graph

    features: list[dict] = []
    for nid in graph.node_ids:
        node = graph.nodes[nid]
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [node.x, node.y]},
                "properties": {"id": nid},
            }
        )
    for eid in graph.edge_ids:
        edge = graph.edges[eid]
        a, b = graph.nodes[edge.u], graph.nodes[edge.v]
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "LineString", "coordinates": [[a.x, a.y], [b.x, b.y]]},
                "properties": {
                    "id": eid,
                    "length_m": edge.length_m,
                    "speed_mps": edge.speed_mps,
                    "kind": edge.kind,
                    "bridge_id": edge.bridge_id,
                    "h_r": edge.h_r,
                },
            }
        )
    _json_dump({"type": "FeatureCollection", "features": features}, paths.network)

    with open(paths.bridges, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["bridge_id", "h_b", "mass_ton_per_m", "x", "y"])
        for rec in sorted(bundle.bridges, key=lambda r: r.bridge_id):
            writer.writerow([rec.bridge_id, repr(rec.deck_elevation_m), repr(rec.mass_ton_per_m), repr(rec.x), repr(rec.y)])

    surge = bundle.config.surge
    with open(paths.surge, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["x", "y", "h_st", "h_s"])
        for i in range(len(surge)):
            writer.writerow([repr(float(surge.x[i])), repr(float(surge.y[i])), repr(float(surge.h_st[i])), repr(float(surge.h_s[i]))])

    with open(paths.supplies, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["supply_id", "x", "y", "capacity"])
        for s in bundle.supplies:
            writer.writerow([s.supply_id, repr(s.x), repr(s.y), repr(s.capacity)])

    group_cols = sorted({name for d in bundle.demands for name in d.subgroups})
    with open(paths.demands, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["demand_id", "x", "y", "population", *group_cols])
        for d in bundle.demands:
            row = [d.demand_id, repr(d.x), repr(d.y), repr(d.population)]
            row.extend(repr(float(d.subgroups.get(name, 0.0))) for name in group_cols)
            writer.writerow(row)

    cfg = bundle.config
    lines = [
        f"storm = {cfg.storm}",
        f"crs = {bundle.crs}",
        f"datum = {bundle.datum}",
        f"d0_minutes = {cfg.d0_minutes!r}",
        f"samples = {cfg.samples}",
        f"seed = {cfg.seed}",
        f"horizons = {','.join(cfg.horizons)}",
        f"bridge_close_zc = {cfg.thresholds.bridge_close_zc!r}",
        f"road_close_din = {cfg.thresholds.road_close_din!r}",
        f"workers = {cfg.workers}",
        f"convergence_window = {cfg.convergence_window}",
        f"convergence_tolerance = {cfg.convergence_tolerance!r}",
    ]
    if surge.coverage_radius_m is not None:
        lines.append(f"coverage_radius_m = {surge.coverage_radius_m!r}")
    paths.config.write_text("\n".join(lines) + "\n")
    return paths


@dataclass(frozen=True)
class SyntheticFixtureSpec:
    """Parameters for the synthetic coastal-county fixture.

    The county is a road grid split by an east-west channel; the only
    ways across are bridges. Surge decays linearly away from the channel
    while ground rises, so flooding forms a band around it. Supplies
    cluster southeast and southwest with a scattered remainder north.
    """

    seed: int = 42
    grid_width: int = 89
    grid_height: int = 23
    spacing_m: float = 300.0
    bridge_count: int = 88
    spans_per_corridor: int = 11
    demand_count: int = 121
    supply_count: int = 1021
    storm: str = "storm-1-like"
    surge_peak_m: float | None = None
    surge_decay_m: float | None = None
    wave_ratio: float = 0.2
    deck_range_m: tuple[float, float] = (5.0, 11.5)
    d0_minutes: float = 50.0
    samples: int = 1000
    scenario_seed: int = 42
    workers: int = 1

# Built-in storm intensities: (peak storm tide m, decay distance m).
_STORM_PRESETS = {
    "storm-1-like": (6.5, 9000.0),
    "storm-2-like": (7.8, 13000.0),
}


def _fixture_params(spec: SyntheticFixtureSpec) -> tuple[float, float, int]:
    if spec.grid_width < 2 or spec.grid_height < 4:
        raise InvalidSpecError("grid must be at least 2 x 4")
    if spec.spacing_m <= 0 or not math.isfinite(spec.spacing_m):
        raise InvalidSpecError(f"spacing must be finite and > 0, got {spec.spacing_m}")
    if spec.bridge_count < 1:
        raise InvalidSpecError(f"bridge count must be >= 1, got {spec.bridge_count}")
    if not 1 <= spec.spans_per_corridor <= spec.bridge_count:
        raise InvalidSpecError(
            f"spans per corridor must be in [1, {spec.bridge_count}], got {spec.spans_per_corridor}"
        )
    corridors = -(-spec.bridge_count // spec.spans_per_corridor)
    if corridors > spec.grid_width:
        raise InvalidSpecError(
            f"{corridors} crossing corridors do not fit a grid {spec.grid_width} wide"
        )
    if spec.demand_count < 1:
        raise InvalidSpecError(f"demand count must be >= 1, got {spec.demand_count}")
    if spec.supply_count < 1:
        raise InvalidSpecError(f"supply count must be >= 1, got {spec.supply_count}")
    if not 0.0 <= spec.wave_ratio <= 1.0:
        raise InvalidSpecError(f"wave ratio must be in [0, 1], got {spec.wave_ratio}")
    lo, hi = spec.deck_range_m
    if not (math.isfinite(lo) and math.isfinite(hi) and 0.0 < lo <= hi):
        raise InvalidSpecError(f"deck range must satisfy 0 < lo <= hi, got {spec.deck_range_m}")
    if spec.samples < 1:
        raise InvalidSpecError(f"samples must be >= 1, got {spec.samples}")
    peak, decay = _STORM_PRESETS.get(spec.storm, (spec.surge_peak_m, spec.surge_decay_m))
    if spec.surge_peak_m is not None:
        peak = spec.surge_peak_m
    if spec.surge_decay_m is not None:
        decay = spec.surge_decay_m
    if peak is None or decay is None:
        raise InvalidSpecError(
            f"storm {spec.storm!r} has no preset; set surge_peak_m and surge_decay_m"
        )
    if peak < 0 or decay <= 0:
        raise InvalidSpecError(f"surge peak must be >= 0 and decay > 0, got {peak}, {decay}")
    return float(peak), float(decay), corridors


def generate_fixture(spec: SyntheticFixtureSpec, out_dir: str | Path) -> BundlePaths:
    """Write a complete synthetic bundle and return its file paths.

    Deterministic for a given spec. The generated bundle always passes
    load_bundle validation, and with no surge (surge_peak_m = 0) no edge
    closes and no bridge can fail.
    """
    peak, decay, corridors = _fixture_params(spec)
    rng = np.random.default_rng(spec.seed)
    gw, gh, sp = spec.grid_width, spec.grid_height, spec.spacing_m
    width, height = (gw - 1) * sp, (gh - 1) * sp
    channel_row = (gh - 1) // 2  # channel sits between this row and the next
    y_channel = (channel_row + 0.5) * sp

    def node_id(i: int, j: int) -> str:
        return f"n{i:03d}_{j:03d}"

    def ground(y: float) -> float:
        # Bank rows run on causeways; elsewhere ground rises away from
        # the channel, so flooding hugs the inlet.
        dist = abs(y - y_channel)
        if dist <= sp / 2.0:
            return 2.8
        return 0.3 + 0.0024 * (dist - sp / 2.0)

    nodes: list[Node] = []
    node_elev: dict[str, float] = {}
    for i in range(gw):
        for j in range(gh):
            nid = node_id(i, j)
            nodes.append(Node(node_id=nid, x=i * sp, y=j * sp))
            node_elev[nid] = round(ground(j * sp) + rng.uniform(0.0, 0.3), 3)

    # The channel is crossed by a few multi-span corridors. Every span is
    # its own bridge, chained over pier nodes, so one span failure severs
    # the whole corridor and traffic detours to the next one.
    cols = np.round(np.linspace(0, gw - 1, corridors + 2)).astype(int)[1:-1]
    if len(set(cols.tolist())) < corridors:
        cols = np.round(np.linspace(0, gw - 1, corridors)).astype(int)
    if len(set(cols.tolist())) < corridors:
        raise InvalidSpecError(f"cannot place {corridors} distinct corridors on a grid {gw} wide")
    corridor_cols = sorted(cols.tolist())

    edges: list[Edge] = []

    def add_road(eid: str, a: str, b: str) -> None:
        edges.append(
            Edge(
                edge_id=eid, u=a, v=b, length_m=sp, speed_mps=round(rng.uniform(2.5, 6.0), 2),
                kind=ROAD, h_r=min(node_elev[a], node_elev[b]),
            )
        )

    for j in range(gh):
        for i in range(gw - 1):
            add_road(f"eh{i:03d}_{j:03d}", node_id(i, j), node_id(i + 1, j))
    for i in range(gw):
        for j in range(gh - 1):
            if j == channel_row:
                continue  # only corridors cross the channel
            add_road(f"ev{i:03d}_{j:03d}", node_id(i, j), node_id(i, j + 1))

    bridges: list[BridgeRecord] = []
    band_centers = (2.5, 7.5, 12.5, 17.5, 22.5, 27.5, 32.5)
    deck_pattern = (0.05, 0.10, 0.18, 0.9, 0.12, 0.55, 0.14, 0.95)
    deck_lo, deck_hi = spec.deck_range_m
    span_counter = 0
    remaining = spec.bridge_count
    for c, i in enumerate(corridor_cols):
        spans = min(spec.spans_per_corridor, remaining)
        remaining -= spans
        speed = 5.0  # corridors are highway crossings; roads vary instead
        deck = deck_lo + deck_pattern[c % len(deck_pattern)] * (deck_hi - deck_lo) + rng.uniform(-0.2, 0.2)
        deck = min(max(deck, deck_lo), deck_hi)
        y0 = channel_row * sp
        chain = [node_id(i, channel_row)]
        for k in range(spans - 1):
            pier = f"p{i:03d}_{k:02d}"
            nodes.append(Node(node_id=pier, x=i * sp, y=y0 + (k + 1) * sp / spans))
            chain.append(pier)
        chain.append(node_id(i, channel_row + 1))
        for k in range(spans):
            bridge_id = f"b{i:03d}_{k:02d}"
            mass = band_centers[span_counter % len(band_centers)] + rng.uniform(-2.0, 2.0)
            span_counter += 1
            bridges.append(
                BridgeRecord(
                    bridge_id=bridge_id,
                    deck_elevation_m=round(deck, 3),
                    mass_ton_per_m=round(mass, 3),
                    x=i * sp,
                    y=y0 + (k + 0.5) * sp / spans,
                )
            )
            edges.append(
                Edge(
                    edge_id=f"ev{i:03d}_{channel_row:03d}s{k:02d}",
                    u=chain[k], v=chain[k + 1], length_m=sp / spans, speed_mps=speed,
                    kind=BRIDGE, bridge_id=bridge_id,
                )
            )

    graph = build_graph(nodes, edges, bridges)

    # Surge decays with distance from an inlet at the channel's midpoint,
    # so flooding forms an ellipse-ish patch instead of severing the whole
    # channel. Samples cover every node plus the channel centerline.
    x_inlet = width / 2.0

    def storm_tide(x: float, y: float) -> float:
        dist = math.hypot(x - x_inlet, y - y_channel)
        return peak * max(0.0, 1.0 - dist / decay)

    sx, sy, s_st, s_s = [], [], [], []
    for i in range(gw):
        h_st = round(storm_tide(i * sp, y_channel), 4)
        sx.append(i * sp)
        sy.append(y_channel)
        s_st.append(h_st)
        s_s.append(round(spec.wave_ratio * h_st, 4))
    for i in range(gw):
        for j in range(gh):
            h_st = round(storm_tide(i * sp, j * sp), 4)
            sx.append(i * sp)
            sy.append(j * sp)
            s_st.append(h_st)
            s_s.append(round(spec.wave_ratio * h_st, 4))
    surge = SurgeField(sx, sy, s_st, s_s, datum_label="fixture-datum")

    side = math.ceil(math.sqrt(spec.demand_count))
    demands: list[DemandSite] = []
    for k in range(spec.demand_count):
        row, col = divmod(k, side)
        x = (col + 0.5) / side * width + rng.uniform(-0.3, 0.3) * sp
        y = (row + 0.5) / side * height + rng.uniform(-0.3, 0.3) * sp
        pop = int(rng.integers(300, 3000))
        below = int(round(pop * rng.uniform(0.05, 0.35)))
        demands.append(
            DemandSite(
                demand_id=f"d{k:03d}",
                x=round(min(max(x, 0.0), width), 2),
                y=round(min(max(y, 0.0), height), 2),
                population=float(pop),
                subgroups={
                    "age65plus": float(int(round(pop * rng.uniform(0.08, 0.30)))),
                    "below_poverty": float(below),
                    "above_poverty": float(pop - below),
                },
            )
        )

    n_se = int(round(0.6 * spec.supply_count))
    n_sw = int(round(0.3 * spec.supply_count))
    n_strip = spec.supply_count - n_se - n_sw
    supplies: list[SupplySite] = []

    def add_supply(x: float, y: float) -> None:
        k = len(supplies)
        capacity = float(int(round(math.exp(rng.uniform(math.log(2.0), math.log(400.0))))))
        supplies.append(
            SupplySite(
                supply_id=f"s{k:04d}",
                x=round(min(max(x, 0.0), width), 2),
                y=round(min(max(y, 0.0), height), 2),
                capacity=capacity,
            )
        )

    # Two dense clusters plus a thin strip along the south bank. All
    # supply sits south of the channel, so the north side depends on the
    # crossing corridors.
    for _ in range(n_se):
        add_supply(rng.normal(0.75 * width, 1200.0), rng.normal(0.22 * height, 700.0))
    for _ in range(n_sw):
        add_supply(rng.normal(0.18 * width, 1000.0), rng.normal(0.20 * height, 700.0))
    for _ in range(max(n_strip, 0)):
        add_supply(rng.uniform(0.05 * width, 0.95 * width), rng.uniform(0.33 * height, 0.45 * height))

    config = ScenarioConfig(
        storm=spec.storm,
        surge=surge,
        d0_minutes=spec.d0_minutes,
        samples=spec.samples,
        seed=spec.scenario_seed,
        workers=spec.workers,
    )
    bundle = DatasetBundle(
        graph=graph,
        bridges=tuple(sorted(bridges, key=lambda b: b.bridge_id)),
        supplies=tuple(supplies),
        demands=tuple(demands),
        config=config,
        crs="local-meters",
        datum="fixture-datum",
    )
    return write_bundle(bundle, out_dir)


def generate_twin_town(p_fail: float = 0.5, samples: int = 1000, seed: int = 7) -> DatasetBundle:
    """A four-node town whose access has exactly two outcomes.

    All demand sits west of a single bridge, all supply east, and the
    supply side holds no reachable alternative, so each sample scores
    either the fully open value or zero. The bridge's deck elevation is
    back-solved so its failure probability equals p_fail. Useful as a
    closed-form oracle for the Monte Carlo estimate.
    """
    if not 0.0 <= p_fail <= 0.7:
        raise InvalidSpecError(f"p_fail must be in [0, 0.7], got {p_fail}")
    h_st = 1.0
    # Lightest mass band, no waves: p = a + c * z_c, so z_c = (a - p) / -c.
    if p_fail == 0.0:
        z_c = 6.0  # far above water: the affine form goes negative, clamps to 0
    else:
        z_c = (0.6468 - p_fail) / 0.1376
    nodes = [
        Node("na", 0.0, 0.0),
        Node("nb", 600.0, 0.0),
        Node("nc", 1200.0, 0.0),
        Node("nd", 1800.0, 0.0),
    ]
    edges = [
        Edge("e-ab", "na", "nb", 600.0, 10.0, ROAD, h_r=5.0),
        Edge("e-bc", "nb", "nc", 600.0, 10.0, BRIDGE, bridge_id="b-main"),
        Edge("e-cd", "nc", "nd", 600.0, 10.0, ROAD, h_r=5.0),
    ]
    bridges = [BridgeRecord("b-main", deck_elevation_m=h_st + z_c, mass_ton_per_m=2.0, x=900.0, y=0.0)]
    graph = build_graph(nodes, edges, bridges)
    surge = SurgeField([900.0], [0.0], [h_st], [0.0], datum_label="twin-datum")
    supplies = (
        SupplySite("s1", 1800.0, 10.0, 10.0),
        SupplySite("s2", 1800.0, -10.0, 20.0),
    )
    demands = (
        DemandSite("d1", 0.0, 10.0, 100.0),
        DemandSite("d2", 0.0, -10.0, 200.0),
    )
    config = ScenarioConfig(storm="twin", surge=surge, samples=samples, seed=seed)
    return DatasetBundle(
        graph=graph,
        bridges=tuple(bridges),
        supplies=supplies,
        demands=demands,
        config=config,
        crs="local-meters",
        datum="twin-datum",
    )


def override_config(config: ScenarioConfig, **overrides: Any) -> ScenarioConfig:
    """Apply non-None overrides on top of a loaded configuration."""
    changes = {k: v for k, v in overrides.items() if v is not None}
    return dataclasses.replace(config, **changes) if changes else config
