"""Landscape structure and site value types.

A structure is a 1-D chain of contiguous segments along a single axis. Scale
checks are advisory: they return named warnings and never raise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

MILE_FT = 5280.0

LENGTH_RANGE_FT = (1 * MILE_FT, 10 * MILE_FT)
HEIGHT_RANGE_FT = (100.0, 1000.0)
WIDTH_RANGE_FT = (300.0, 1000.0)
FLEET_SIZE_RANGE = (10, 100)


class SiteKind(str, Enum):
    CENTRAL_HQ = "CentralHQ"
    SUPPLY_STATION = "SupplyStation"
    FIELD_STAGING_AREA = "FieldStagingArea"
    FIELD_OPS = "FieldOps"

    @property
    def rank(self) -> int:
        return _RANKS[self]


_RANKS = {
    SiteKind.CENTRAL_HQ: 0,
    SiteKind.SUPPLY_STATION: 1,
    SiteKind.FIELD_STAGING_AREA: 2,
    SiteKind.FIELD_OPS: 3,
}


@dataclass(frozen=True)
class Segment:
    id: int
    start_ft: float
    length_ft: float
    height_ft: float = 0.0
    width_ft: float = 0.0
    # task kind (a capability name) -> integer work-units
    work_required: Mapping[str, int] = field(default_factory=dict)
    payload_required: int = 0

    @property
    def end_ft(self) -> float:
        return self.start_ft + self.length_ft

    @property
    def total_work(self) -> int:
        return sum(self.work_required.values())


@dataclass(frozen=True)
class LandscapeStructure:
    segments: tuple[Segment, ...]

    @property
    def total_length_ft(self) -> float:
        return sum(s.length_ft for s in self.segments)

    @property
    def height_ft(self) -> float:
        return max((s.height_ft for s in self.segments), default=0.0)

    @property
    def width_ft(self) -> float:
        return max((s.width_ft for s in self.segments), default=0.0)

    @property
    def total_work(self) -> int:
        return sum(s.total_work for s in self.segments)


@dataclass(frozen=True)
class Site:
    id: str
    kind: SiteKind
    inventory: int = 0
    # None marks an off-site location with no position on the structure axis
    position_ft: float | None = None


@dataclass(frozen=True)
class ScaleWarning:
    code: str
    message: str


def _range_warnings(name: str, value: float, bounds: tuple[float, float], unit: str,
                    below: str | None = None) -> list[ScaleWarning]:
    lo, hi = bounds
    if value < lo:
        msg = below or f"{name} below range"
        return [ScaleWarning(f"{name}_below_range",
                             f"{msg}: {value:g} {unit} < {lo:g} {unit}")]
    if value > hi:
        return [ScaleWarning(f"{name}_above_range",
                             f"{name} above range: {value:g} {unit} > {hi:g} {unit}")]
    return []


def validate_structure(structure: LandscapeStructure) -> list[ScaleWarning]:
    """Return advisory warnings for dimensions outside landscape scale.

    Length is checked against 1 to 10 miles, height against 100 to 1000 ft
    and width against 300 to 1000 ft. Height and width use the largest
    segment value. The input is never modified.
    """
    out = _range_warnings("length", structure.total_length_ft, LENGTH_RANGE_FT, "ft",
                          below="below landscape scale")
    out += _range_warnings("height", structure.height_ft, HEIGHT_RANGE_FT, "ft")
    out += _range_warnings("width", structure.width_ft, WIDTH_RANGE_FT, "ft")
    return out


def fleet_size_warnings(fleet_size: int) -> list[ScaleWarning]:
    return _range_warnings("fleet_size", fleet_size, FLEET_SIZE_RANGE, "drones")
