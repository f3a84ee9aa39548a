"""Monte Carlo closure sampling and accessibility aggregation.

Each sample draws an independent failure outcome per bridge from its
uplift probability, builds the closed-edge set for each recovery horizon,
and rescores accessibility on the surviving network. Draws are counter
based: the uniform for (seed, sample, bridge) is a pure hash of those
three values, so results never depend on iteration order, worker count,
or platform RNG state, and reruns with the same seed are bit-identical.
Samples with identical closed-edge sets reuse one network evaluation.
"""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import access, fragility, hazard, network
from .errors import InvalidInputError


def uniform_draw(master_seed: int, sample_index: int, bridge_id: str) -> float:
    """Deterministic uniform in [0, 1) keyed by seed, sample and bridge."""
    payload = f"{master_seed}:{sample_index}:{bridge_id}".encode()
    digest = hashlib.sha256(payload).digest()
    return (int.from_bytes(digest[:8], "big") >> 11) * 2.0**-53


def sample_failures(
    failure_probability: Mapping[str, float],
    master_seed: int,
    sample_index: int,
) -> dict[str, bool]:
    """One Bernoulli outcome per bridge for one Monte Carlo sample.

    Probabilities of 0 and 1 are honored exactly. Because each bridge
    keeps its own uniform across probability changes, raising every
    probability pointwise can only grow the failure set (common random
    numbers), which keeps paired storm comparisons noise-free.
    """
    if sample_index < 0:
        raise InvalidInputError(f"sample index must be >= 0, got {sample_index}")
    out: dict[str, bool] = {}
    for bridge_id, p in failure_probability.items():
        if not math.isfinite(p) or not 0.0 <= p <= 1.0:
            raise InvalidInputError(f"bridge {bridge_id}: probability {p} outside [0, 1]")
        out[bridge_id] = uniform_draw(master_seed, sample_index, bridge_id) < p
    return out


def convergence_report(
    trace: np.ndarray,
    window: int = 100,
    tolerance: float = 0.01,
) -> int | None:
    """Smallest sample count at which every running mean has settled.

    trace holds per-sample values, one row per sample (a single column
    is fine). The estimate at n is converged when the trailing `window`
    running means span a range of at most tolerance * |current mean|
    (exactly zero range when the current mean is zero). Returns None if
    the trace never settles or is shorter than the window.
    """
    if window < 1:
        raise InvalidInputError(f"window must be >= 1, got {window}")
    if not math.isfinite(tolerance) or tolerance <= 0.0:
        raise InvalidInputError(f"tolerance must be finite and > 0, got {tolerance}")
    trace = np.asarray(trace, dtype=float)
    if trace.ndim == 1:
        trace = trace[:, None]
    if trace.ndim != 2 or trace.shape[0] == 0:
        raise InvalidInputError("trace must be a non-empty 1-d or 2-d array")
    n = trace.shape[0]
    if n < window:
        return None
    running = np.cumsum(trace, axis=0) / np.arange(1, n + 1, dtype=float)[:, None]
    windows = sliding_window_view(running, window, axis=0)  # (n-window+1, k, window)
    spans = windows.max(axis=-1) - windows.min(axis=-1)
    reference = np.abs(running[window - 1 :])
    settled = np.where(reference > 0.0, spans <= tolerance * reference, spans == 0.0)
    rows = np.flatnonzero(settled.all(axis=1))
    if rows.size == 0:
        return None
    return int(rows[0]) + window


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything a scenario run needs besides the dataset itself."""

    storm: str
    surge: hazard.SurgeField
    thresholds: hazard.ExposureThresholds = hazard.ExposureThresholds()
    d0_minutes: float = 50.0
    samples: int = 1000
    seed: int = 42
    horizons: tuple[str, ...] = network.HORIZONS
    workers: int = 1
    convergence_window: int = 100
    convergence_tolerance: float = 0.01

    def __post_init__(self) -> None:
        if not self.storm:
            raise InvalidInputError("storm label must be non-empty")
        if not (math.isfinite(self.d0_minutes) and self.d0_minutes > 0.0):
            raise InvalidInputError(f"d0 must be finite and > 0, got {self.d0_minutes}")
        if self.samples < 1:
            raise InvalidInputError(f"samples must be >= 1, got {self.samples}")
        if self.workers < 1:
            raise InvalidInputError(f"workers must be >= 1, got {self.workers}")
        if not self.horizons:
            raise InvalidInputError("at least one horizon required")
        for horizon in self.horizons:
            if horizon not in network.HORIZONS:
                raise InvalidInputError(f"unknown horizon {horizon!r}; expected one of {network.HORIZONS}")
        if len(set(self.horizons)) != len(self.horizons):
            raise InvalidInputError("horizons must be distinct")


@dataclass
class HorizonResult:
    """Aggregated accessibility for one recovery horizon.

    Scores are scaled to capacity per 1,000 residents. sample_scores has
    one row per Monte Carlo sample and one column per demand site;
    running_mean holds its cumulative means, the per-demand convergence
    trace. converged_at is the first sample count at which every
    demand's running mean has settled, or None.
    """

    horizon: str
    demand_ids: tuple[str, ...]
    mean_scores: np.ndarray
    cov: np.ndarray
    quartiles: dict[str, str]
    group_averages: dict[str, float]
    no_access_fraction: float
    average_cov: float
    converged_at: int | None
    sample_scores: np.ndarray
    running_mean: np.ndarray


@dataclass
class ScenarioResult:
    storm: str
    seed: int
    samples: int
    d0_minutes: float
    demand_ids: tuple[str, ...]
    failure_probability: dict[str, float]
    exposures: hazard.ExposureSet
    horizons: dict[str, HorizonResult] = field(default_factory=dict)


# Worker context for parallel mask evaluation; set once per process.
_WORKER_CTX: tuple | None = None


def _init_worker(graph, demands, supplies, d0_minutes, snapped) -> None:
    global _WORKER_CTX
    _WORKER_CTX = (graph, demands, supplies, d0_minutes, snapped)


def _scaled_scores_for_closed_set(
    graph: network.RoadGraph,
    closed_edge_ids: frozenset[str],
    demands: Sequence[access.DemandSite],
    supplies: Sequence[access.SupplySite],
    d0_minutes: float,
    snapped: tuple[np.ndarray, np.ndarray],
) -> np.ndarray:
    mask = network.ClosureMask(provenance={eid: network.STRUCTURAL for eid in sorted(closed_edge_ids)})
    table = network.travel_time_table(graph, mask, demands, supplies, d0_minutes, snapped=snapped)
    return access.score_vector(table, supplies, demands) * access.SCORE_SCALE


def _eval_in_worker(closed_edge_ids: frozenset[str]) -> np.ndarray:
    graph, demands, supplies, d0_minutes, snapped = _WORKER_CTX
    return _scaled_scores_for_closed_set(graph, closed_edge_ids, demands, supplies, d0_minutes, snapped)


def _evaluate_distinct_masks(
    keys: list[frozenset[str]],
    graph: network.RoadGraph,
    demands: Sequence[access.DemandSite],
    supplies: Sequence[access.SupplySite],
    d0_minutes: float,
    snapped: tuple[np.ndarray, np.ndarray],
    workers: int,
) -> dict[frozenset[str], np.ndarray]:
    """Score vector per distinct closed-edge set.

    Keys are evaluated in a fixed sorted order and each evaluation is a
    pure function of its key, so the result is identical for any worker
    count.
    """
    ordered = sorted(keys, key=lambda k: tuple(sorted(k)))
    if workers <= 1 or len(ordered) < 2:
        return {
            key: _scaled_scores_for_closed_set(graph, key, demands, supplies, d0_minutes, snapped)
            for key in ordered
        }
    with ProcessPoolExecutor(
        max_workers=workers,
        initializer=_init_worker,
        initargs=(graph, demands, supplies, d0_minutes, snapped),
    ) as pool:
        vectors = list(pool.map(_eval_in_worker, ordered, chunksize=max(1, len(ordered) // (4 * workers))))
    return dict(zip(ordered, vectors))


def _merge_structural(base: Mapping[str, str], graph: network.RoadGraph, failed: Sequence[str]) -> dict[str, str]:
    closed = dict(base)
    for bridge_id in failed:
        for eid in graph.edges_for_bridge(bridge_id):
            closed[eid] = network.STRUCTURAL
    return closed


def _column_cov(sample_scores: np.ndarray) -> np.ndarray:
    """Per-demand coefficient of variation across samples.

    Columns whose samples are all identical get exactly 0, with no
    floating-point residue from the variance formula.
    """
    mean = sample_scores.mean(axis=0)
    std = sample_scores.std(axis=0)
    identical = sample_scores.min(axis=0) == sample_scores.max(axis=0)
    std[identical] = 0.0
    cov = np.zeros_like(mean)
    np.divide(std, mean, out=cov, where=mean > 0.0)
    return cov


def run_scenario(
    config: ScenarioConfig,
    graph: network.RoadGraph,
    bridges: Sequence[network.BridgeRecord],
    supplies: Sequence[access.SupplySite],
    demands: Sequence[access.DemandSite],
    fragility_table: fragility.FragilityTable | None = None,
) -> ScenarioResult:
    """Run the full Monte Carlo scenario for every configured horizon.

    Exposures and failure probabilities are deterministic per storm, so
    they are computed once; only bridge failures are sampled. Samples
    that produce the same closed-edge set share one network evaluation,
    and the two horizons share that cache as well. Subgroups with zero
    total weight are left out of the group averages.
    """
    if not demands:
        raise InvalidInputError("scenario needs at least one demand location")
    if {b.bridge_id for b in bridges} != set(graph.bridges):
        raise InvalidInputError("bridge records do not match the graph's bridges")
    table = fragility_table if fragility_table is not None else fragility.default_table()

    bridge_rows = sorted(bridges, key=lambda b: b.bridge_id)
    exposures = hazard.evaluate_exposures(
        config.surge,
        [(b.bridge_id, b.deck_elevation_m, b.x, b.y) for b in bridge_rows],
        graph.road_sites(),
    )
    failure_probability: dict[str, float] = {}
    for rec in bridge_rows:
        exp = exposures.bridges[rec.bridge_id]
        row = table.coefficients_for(rec.mass_ton_per_m)
        failure_probability[rec.bridge_id] = fragility.uplift_probability(row, exp.h_max, exp.z_c)

    no_failures = {bid: False for bid in failure_probability}
    base_masks = {
        horizon: network.closure_mask(graph, exposures, config.thresholds, no_failures, horizon)
        for horizon in config.horizons
    }

    # Pass one: per-sample closed-edge sets (cheap), collecting distinct keys.
    sample_keys: dict[str, list[frozenset[str]]] = {h: [] for h in config.horizons}
    distinct: set[frozenset[str]] = set()
    for index in range(config.samples):
        draw = sample_failures(failure_probability, config.seed, index)
        failed = [bid for bid in failure_probability if draw[bid]]
        for horizon in config.horizons:
            key = frozenset(_merge_structural(base_masks[horizon].provenance, graph, failed))
            sample_keys[horizon].append(key)
            distinct.add(key)

    # Pass two: one network evaluation per distinct closed-edge set.
    snapped = (network.snap_sites(graph, demands), network.snap_sites(graph, supplies))
    cache = _evaluate_distinct_masks(
        list(distinct), graph, demands, supplies, config.d0_minutes, snapped, config.workers
    )

    demand_ids = tuple(d.demand_id for d in demands)
    result = ScenarioResult(
        storm=config.storm,
        seed=config.seed,
        samples=config.samples,
        d0_minutes=config.d0_minutes,
        demand_ids=demand_ids,
        failure_probability=failure_probability,
        exposures=exposures,
    )
    population = {d.demand_id: d.population for d in demands}
    subgroup_weights = {
        name: {d.demand_id: float(d.subgroups.get(name, 0.0)) for d in demands}
        for name in access.group_names(demands)
    }

    for horizon in config.horizons:
        sample_scores = np.stack([cache[key] for key in sample_keys[horizon]])
        mean_scores = sample_scores.mean(axis=0)
        cov = _column_cov(sample_scores)
        mean_access = access.AccessScores(
            scores={did: float(v) for did, v in zip(demand_ids, mean_scores)},
            d0_minutes=config.d0_minutes,
        )
        group_averages = {"overall": access.weighted_average(mean_access, population)}
        for name, weights in subgroup_weights.items():
            if sum(weights.values()) > 0.0:
                group_averages[name] = access.weighted_average(mean_access, weights)
        # Convergence requires every demand's running mean to settle.
        running_mean = np.cumsum(sample_scores, axis=0) / np.arange(1, config.samples + 1, dtype=float)[:, None]
        converged_at = convergence_report(sample_scores, config.convergence_window, config.convergence_tolerance)
        result.horizons[horizon] = HorizonResult(
            horizon=horizon,
            demand_ids=demand_ids,
            mean_scores=mean_scores,
            cov=cov,
            quartiles=access.quartile_classify(mean_access),
            group_averages=group_averages,
            no_access_fraction=access.no_access_fraction(mean_access),
            average_cov=float(cov.mean()),
            converged_at=converged_at,
            sample_scores=sample_scores,
            running_mean=running_mean,
        )
    return result
