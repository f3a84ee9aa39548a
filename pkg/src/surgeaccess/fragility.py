"""Bridge deck uplift fragility.

Failure probability is an affine function of the design maximum wave height
and the deck's elevation relative to the storm tide, clamped to [0, 1].
Coefficients depend on the superstructure mass per unit length, looked up
from a banded table. Bands are half-open on the left, (lo, hi], so a mass
sitting exactly on a boundary belongs to the lower band.
"""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass
from pathlib import Path

from .errors import InvalidInputError, UnsupportedBridgeError


@dataclass(frozen=True)
class FragilityRow:
    """Coefficients valid for masses in (band_lo, band_hi] ton/m."""

    band_lo: float
    band_hi: float
    a: float
    b: float
    c: float


# Default banded coefficients: (band_lo, band_hi, a, b, c).
_DEFAULT_ROWS = (
    FragilityRow(0.0, 5.0, 0.6468, 0.0406, -0.1376),
    FragilityRow(5.0, 10.0, 0.4166, 0.0456, -0.2343),
    FragilityRow(10.0, 15.0, 0.3291, 0.0546, -0.2464),
    FragilityRow(15.0, 20.0, -0.3300, 0.0576, -0.2444),
    FragilityRow(20.0, 25.0, 0.2843, 0.0512, -0.2421),
    FragilityRow(25.0, 30.0, 0.2865, 0.0881, -0.2391),
    FragilityRow(30.0, 35.0, -0.1870, 0.0782, -0.2618),
)


class FragilityTable:
    """Ordered, contiguous mass bands with their uplift coefficients."""

    def __init__(self, rows: tuple[FragilityRow, ...] | list[FragilityRow]):
        rows = tuple(rows)
        if not rows:
            raise InvalidInputError("fragility table needs at least one band")
        for row in rows:
            for name in ("band_lo", "band_hi", "a", "b", "c"):
                if not math.isfinite(getattr(row, name)):
                    raise InvalidInputError(f"non-finite {name} in band ({row.band_lo}, {row.band_hi}]")
            if row.band_lo >= row.band_hi:
                raise InvalidInputError(f"empty band ({row.band_lo}, {row.band_hi}]")
        if rows[0].band_lo < 0.0:
            raise InvalidInputError("mass bands must start at or above zero")
        for prev, cur in zip(rows, rows[1:]):
            if cur.band_lo != prev.band_hi:
                raise InvalidInputError(
                    f"bands must be contiguous: ({prev.band_lo}, {prev.band_hi}] then ({cur.band_lo}, {cur.band_hi}]"
                )
        self.rows = rows

    @property
    def domain(self) -> tuple[float, float]:
        """Supported mass range as the half-open interval (lo, hi]."""
        return (self.rows[0].band_lo, self.rows[-1].band_hi)

    def coefficients_for(self, mass_ton_per_m: float) -> FragilityRow:
        """Return the band covering the given mass.

        Boundary masses resolve to the lower band. Masses outside the
        table domain are refused outright; there is no extrapolation.
        """
        if not math.isfinite(mass_ton_per_m):
            raise InvalidInputError(f"mass must be finite, got {mass_ton_per_m}")
        lo, hi = self.domain
        if not lo < mass_ton_per_m <= hi:
            raise UnsupportedBridgeError(
                f"mass {mass_ton_per_m} ton/m outside supported range ({lo}, {hi}]"
            )
        for row in self.rows:
            if row.band_lo < mass_ton_per_m <= row.band_hi:
                return row
        raise UnsupportedBridgeError(f"mass {mass_ton_per_m} ton/m not covered by any band")

    def checksum(self) -> str:
        """sha256 over the canonical text form of the rows."""
        text = "\n".join(
            f"{r.band_lo!r},{r.band_hi!r},{r.a!r},{r.b!r},{r.c!r}" for r in self.rows
        )
        return hashlib.sha256(text.encode("ascii")).hexdigest()

    def __eq__(self, other: object) -> bool:
        return isinstance(other, FragilityTable) and self.rows == other.rows

    def __len__(self) -> int:
        return len(self.rows)

    @classmethod
    def default(cls) -> FragilityTable:
        return cls(_DEFAULT_ROWS)

    @classmethod
    def from_csv(cls, path: str | Path) -> FragilityTable:
        """Load bands from a CSV with columns band_lo, band_hi, a, b, c."""
        required = ("band_lo", "band_hi", "a", "b", "c")
        rows: list[FragilityRow] = []
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            fields = reader.fieldnames or []
            missing = [name for name in required if name not in fields]
            if missing:
                raise InvalidInputError(f"{path}: missing column(s) {', '.join(missing)}")
            for lineno, rec in enumerate(reader, start=2):
                try:
                    rows.append(FragilityRow(*(float(rec[name]) for name in required)))
                except (TypeError, ValueError) as exc:
                    raise InvalidInputError(f"{path}:{lineno}: bad row ({exc})") from exc
        return cls(rows)


def default_table() -> FragilityTable:
    """The built-in coefficient table."""
    return FragilityTable.default()


def coefficients_for(mass_ton_per_m: float, table: FragilityTable | None = None) -> FragilityRow:
    """Band lookup against the given table (default: built-in)."""
    return (table or FragilityTable.default()).coefficients_for(mass_ton_per_m)


def uplift_probability(row: FragilityRow, h_max_m: float, z_c_m: float) -> float:
    """Deck uplift failure probability for one bridge under one storm.

    p = clamp(a + b * h_max + c * z_c, 0, 1), with h_max the design
    maximum wave height (m, >= 0) and z_c the deck elevation relative
    to storm tide (m, may be negative).
    """
    if not math.isfinite(h_max_m) or h_max_m < 0.0:
        raise InvalidInputError(f"h_max must be finite and >= 0, got {h_max_m}")
    if not math.isfinite(z_c_m):
        raise InvalidInputError(f"z_c must be finite, got {z_c_m}")
    raw = row.a + row.b * h_max_m + row.c * z_c_m
    return min(1.0, max(0.0, raw))
