"""Two-step floating catchment accessibility scoring.

Step one assigns each supply site a ratio of its capacity to the total
population that can reach it within the catchment. Step two sums those
ratios over the supplies each demand location can reach. Scores are kept
as raw ratios internally and scaled to capacity per 1,000 residents for
reporting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence

import numpy as np

from .errors import InvalidInputError, UndefinedGroupError

if TYPE_CHECKING:
    from .network import TravelTimeTable

# Reporting scale: supply capacity per this many residents.
SCORE_SCALE = 1000.0

# Percentile ranks bounding the four score classes.
_QUARTILE_RANKS = (25, 50, 75)
QUARTILE_LABELS = ("Q1", "Q2", "Q3", "Q4")


@dataclass(frozen=True)
class SupplySite:
    """A service location with a nonnegative capacity (employee count)."""

    supply_id: str
    x: float
    y: float
    capacity: float

    def __post_init__(self) -> None:
        for name in ("x", "y", "capacity"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidInputError(f"supply {self.supply_id}: {name} must be finite")
        if self.capacity < 0.0:
            raise InvalidInputError(f"supply {self.supply_id}: capacity must be >= 0")


@dataclass(frozen=True)
class DemandSite:
    """A population location, optionally split into named subgroups.

    Subgroup weights are head counts; each must fit inside the total
    population. Groups may overlap each other.
    """

    demand_id: str
    x: float
    y: float
    population: float
    subgroups: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name in ("x", "y", "population"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidInputError(f"demand {self.demand_id}: {name} must be finite")
        if self.population < 0.0:
            raise InvalidInputError(f"demand {self.demand_id}: population must be >= 0")
        for group, weight in self.subgroups.items():
            if not math.isfinite(weight) or weight < 0.0:
                raise InvalidInputError(f"demand {self.demand_id}: group {group} weight must be finite and >= 0")
            if weight > self.population:
                raise InvalidInputError(
                    f"demand {self.demand_id}: group {group} weight {weight} exceeds population {self.population}"
                )


@dataclass(frozen=True)
class AccessScores:
    """Per-demand accessibility scores for one catchment radius."""

    scores: Mapping[str, float]
    d0_minutes: float


def _aligned_index(ids: Sequence[str], kind: str) -> dict[str, int]:
    index: dict[str, int] = {}
    for pos, sid in enumerate(ids):
        if sid in index:
            raise InvalidInputError(f"duplicate {kind} id {sid}")
        index[sid] = pos
    return index


def _table_pairs(
    table: TravelTimeTable,
    supplies: Sequence[SupplySite],
    demands: Sequence[DemandSite],
) -> tuple[np.ndarray, np.ndarray]:
    """Reachable (demand, supply) index pairs aligned to the given lists.

    Pairs come back sorted by demand position then supply position so
    downstream accumulation order is deterministic.
    """
    d_index = _aligned_index([d.demand_id for d in demands], "demand")
    s_index = _aligned_index([s.supply_id for s in supplies], "supply")
    for did in table.demand_ids:
        if did not in d_index:
            raise InvalidInputError(f"table demand {did} missing from demand list")
    for sid in table.supply_ids:
        if sid not in s_index:
            raise InvalidInputError(f"table supply {sid} missing from supply list")

    remap_d = np.array([d_index[did] for did in table.demand_ids], dtype=np.int64)
    remap_s = np.array([s_index[sid] for sid in table.supply_ids], dtype=np.int64)
    d_idx = remap_d[table.demand_index]
    s_idx = remap_s[table.supply_index]
    order = np.lexsort((s_idx, d_idx))
    return d_idx[order], s_idx[order]


def ratio_vector(
    table: TravelTimeTable,
    supplies: Sequence[SupplySite],
    demands: Sequence[DemandSite],
) -> tuple[np.ndarray, np.ndarray]:
    """(ratio, reachable_population) per supply, aligned to the supply list.

    Supplies whose catchment holds zero population are inert: their ratio
    is reported as 0 here and they are dropped from the mapping form.
    """
    d_idx, s_idx = _table_pairs(table, supplies, demands)
    pop = np.array([d.population for d in demands], dtype=float)
    cap = np.array([s.capacity for s in supplies], dtype=float)
    denom = np.bincount(s_idx, weights=pop[d_idx], minlength=len(supplies))
    ratio = np.zeros(len(supplies), dtype=float)
    np.divide(cap, denom, out=ratio, where=denom > 0.0)
    return ratio, denom


def score_vector(
    table: TravelTimeTable,
    supplies: Sequence[SupplySite],
    demands: Sequence[DemandSite],
) -> np.ndarray:
    """Unscaled accessibility score per demand, aligned to the demand list."""
    d_idx, s_idx = _table_pairs(table, supplies, demands)
    pop = np.array([d.population for d in demands], dtype=float)
    cap = np.array([s.capacity for s in supplies], dtype=float)
    denom = np.bincount(s_idx, weights=pop[d_idx], minlength=len(supplies))
    ratio = np.zeros(len(supplies), dtype=float)
    np.divide(cap, denom, out=ratio, where=denom > 0.0)
    return np.bincount(d_idx, weights=ratio[s_idx], minlength=len(demands))


def supply_ratios(
    table: TravelTimeTable,
    supplies: Sequence[SupplySite],
    demands: Sequence[DemandSite],
) -> dict[str, float]:
    """Capacity-to-reachable-population ratio per supply site.

    Inert supplies (no reachable population within the catchment) are
    omitted so they cannot contribute to any score downstream.
    """
    ratio, denom = ratio_vector(table, supplies, demands)
    return {
        s.supply_id: float(r)
        for s, r, d in zip(supplies, ratio, denom)
        if d > 0.0
    }


def accessibility_scores(
    table: TravelTimeTable,
    supplies: Sequence[SupplySite],
    demands: Sequence[DemandSite],
) -> AccessScores:
    """Sum reachable supply ratios per demand location (unscaled)."""
    vec = score_vector(table, supplies, demands)
    return AccessScores(
        scores={d.demand_id: float(v) for d, v in zip(demands, vec)},
        d0_minutes=table.d0_minutes,
    )


def scale_scores(scores: AccessScores, scale: float = SCORE_SCALE) -> AccessScores:
    """Express scores as capacity per `scale` residents."""
    if not math.isfinite(scale) or scale <= 0.0:
        raise InvalidInputError(f"scale must be finite and > 0, got {scale}")
    return AccessScores(
        scores={k: v * scale for k, v in scores.scores.items()},
        d0_minutes=scores.d0_minutes,
    )


def _nearest_rank(sorted_values: np.ndarray, percent: int) -> float:
    """Nearest-rank percentile of an ascending array."""
    n = sorted_values.shape[0]
    rank = -((-percent * n) // 100)  # ceil(percent * n / 100)
    return float(sorted_values[max(rank, 1) - 1])


def quartile_classify(scores: AccessScores) -> dict[str, str]:
    """Label each demand Q1 (lowest quartile) through Q4 (highest).

    Nearest-rank percentiles with ties resolved toward the lower class,
    so the labels are invariant under any positive rescaling of scores.
    """
    if not scores.scores:
        raise InvalidInputError("quartile classification needs at least one score")
    values = np.array(list(scores.scores.values()), dtype=float)
    cuts = [_nearest_rank(np.sort(values), p) for p in _QUARTILE_RANKS]
    labels: dict[str, str] = {}
    for demand_id, value in scores.scores.items():
        if value <= cuts[0]:
            labels[demand_id] = QUARTILE_LABELS[0]
        elif value <= cuts[1]:
            labels[demand_id] = QUARTILE_LABELS[1]
        elif value <= cuts[2]:
            labels[demand_id] = QUARTILE_LABELS[2]
        else:
            labels[demand_id] = QUARTILE_LABELS[3]
    return labels


def weighted_average(scores: AccessScores, weights: Mapping[str, float]) -> float:
    """Population-weighted mean score over the demands carrying weight.

    weights maps demand id to the group's head count at that location;
    demands absent from the mapping contribute nothing.
    """
    num = 0.0
    den = 0.0
    for demand_id, score in scores.scores.items():
        w = float(weights.get(demand_id, 0.0))
        if not math.isfinite(w) or w < 0.0:
            raise InvalidInputError(f"weight for demand {demand_id} must be finite and >= 0")
        num += w * score
        den += w
    if den <= 0.0:
        raise UndefinedGroupError("group has zero total weight")
    return num / den


def no_access_fraction(scores: AccessScores) -> float:
    """Share of demand locations with a score of exactly zero."""
    if not scores.scores:
        raise InvalidInputError("no-access fraction needs at least one score")
    zeros = sum(1 for v in scores.scores.values() if v == 0.0)
    return zeros / len(scores.scores)


def group_names(demands: Iterable[DemandSite]) -> tuple[str, ...]:
    """Sorted union of subgroup names across the demand list."""
    names: set[str] = set()
    for d in demands:
        names.update(d.subgroups.keys())
    return tuple(sorted(names))
