"""Physical drones, their power model, and the virtual drones that time-share them."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Union

TETHER_THRESHOLD_HOURS = 1.0
DEFAULT_TETHER_REACH_FT = 1000.0
DEFAULT_MAX_TETHERED_PER_ANCHOR = 4
_EPS = 1e-9


class DroneRole(str, Enum):
    SUPPLY_STATION = "SupplyStation"
    CENTRAL_COMMAND = "CentralCommand"
    FIELD_STAGING = "FieldStaging"
    FIELD_OPERATION = "FieldOperation"
    FERRY_TAXI = "FerryTaxi"
    TELEPRESENCE = "Telepresence"
    MISC = "Misc"


class Capability(str, Enum):
    PHOTOGRAPHY = "Photography"
    IMAGING = "Imaging"
    TELEMETRY = "Telemetry"
    CLOSE_INSPECTION = "CloseInspection"
    INSPECTION_REPORTING = "InspectionReporting"
    SURVEY = "Survey"
    SWEEP_SCAN_SEARCH = "SweepScanSearch"
    PAYLOAD_HANDLING = "PayloadHandling"
    TOOL_HANDLING = "ToolHandling"
    STRUCTURE_ASSEMBLY = "StructureAssembly"
    VERTICAL_MOVE = "VerticalMove"
    LATERAL_MOVE = "LateralMove"
    SWEEP_TRAVERSAL = "SweepTraversal"
    PACKAGE_DELIVERY = "PackageDelivery"


FERRY_CAPABILITIES = frozenset({Capability.PACKAGE_DELIVERY, Capability.PAYLOAD_HANDLING})


@dataclass(frozen=True)
class Battery:
    capacity_hours: float = 1.0
    recharge_ticks: int = 1


@dataclass(frozen=True)
class Tethered:
    anchor_site: str
    reach_ft: float = DEFAULT_TETHER_REACH_FT


PowerConfig = Union[Battery, Tethered]


@dataclass(frozen=True)
class PhysicalDrone:
    id: str
    role: DroneRole
    capabilities: frozenset[Capability]
    work_rate: int
    power: PowerConfig = field(default_factory=Battery)
    # site id (str), segment id (int) or unplaced
    location: str | int | None = None
    duty_clock_hours: float = 0.0
    recharge_left: int = 0

    @property
    def tethered(self) -> bool:
        return isinstance(self.power, Tethered)

    @property
    def recharging(self) -> bool:
        return self.recharge_left > 0

    @property
    def is_ferry(self) -> bool:
        return self.role is DroneRole.FERRY_TAXI and bool(self.capabilities & FERRY_CAPABILITIES)

    def observable(self) -> dict[str, Any]:
        return {"location": self.location, "duty_clock_hours": round(self.duty_clock_hours, 9)}


@dataclass
class VirtualDrone:
    id: str
    leaf_goal_id: str
    compartment_id: int
    required_capability: Capability
    remaining_work: int
    goal_level: int = 5
    required_resources: frozenset[str] = frozenset()
    bound_physical: str | None = None
    twin_state: dict[str, Any] | None = None

    def bind(self, physical: PhysicalDrone) -> None:
        self.bound_physical = physical.id
        self.twin_state = physical.observable()

    def unbind(self) -> None:
        self.bound_physical = None


def apply_tether_rule(drone: PhysicalDrone, planned_continuous_hours: float,
                      anchor_site: str | None = None,
                      reach_ft: float = DEFAULT_TETHER_REACH_FT) -> PowerConfig:
    """Return the power config a drone must use for a planned duty span.

    Spans strictly longer than one hour require a tether anchored at
    ``anchor_site`` (the compartment's FieldOps site). Shorter spans keep the
    drone's existing config.
    """
    if planned_continuous_hours < 0:
        raise ValueError("planned_continuous_hours must be >= 0")
    if planned_continuous_hours <= TETHER_THRESHOLD_HOURS:
        return drone.power
    if isinstance(drone.power, Tethered) and anchor_site is None:
        return drone.power
    if anchor_site is None:
        raise ValueError(f"drone {drone.id} needs an anchor site to be tethered")
    return Tethered(anchor_site=anchor_site, reach_ft=reach_ft)


def is_runnable(drone: PhysicalDrone, tick_hours: float) -> bool:
    if drone.recharge_left > 0:
        return False
    if isinstance(drone.power, Battery):
        return drone.duty_clock_hours + tick_hours <= drone.power.capacity_hours + _EPS
    return True


def advance_power_state(drone: PhysicalDrone, worked_this_tick: bool, tick_hours: float) -> PhysicalDrone:
    """Advance a drone's duty clock by one tick.

    Battery drones accrue duty only while working. Once another tick would
    overrun capacity the drone enters recharge for ``recharge_ticks`` ticks
    (at least one) and its duty clock resets.
    """
    if drone.recharge_left > 0:
        return replace(drone, recharge_left=drone.recharge_left - 1)
    duty = round(drone.duty_clock_hours + tick_hours, 9) if worked_this_tick else drone.duty_clock_hours
    power = drone.power
    if isinstance(power, Battery) and duty + tick_hours > power.capacity_hours + _EPS:
        return replace(drone, duty_clock_hours=0.0, recharge_left=max(1, power.recharge_ticks))
    return replace(drone, duty_clock_hours=duty)


def capability_match(virtual: VirtualDrone, physical: PhysicalDrone) -> bool:
    return physical.role is DroneRole.FIELD_OPERATION and virtual.required_capability in physical.capabilities
