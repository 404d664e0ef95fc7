"""Scenario type and the JSON scenario file format.

See ``docs/scenario_schema.md`` for the file layout. Every error raised while
loading names the offending field as a dotted path.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from ._util import natural_key
from .compartments import CompartmentPolicy, FixedCount, UniformLength, UniformWork
from .coordination import CStrategy
from .fleet import (Battery, Capability, DroneRole, PhysicalDrone, Tethered,
                    DEFAULT_MAX_TETHERED_PER_ANCHOR, DEFAULT_TETHER_REACH_FT)
from .goals import CORE_ILITIES, DEFAULT_FANOUT, Ility
from .logistics import DEFAULT_FERRY_CAPACITY
from .structure import (LandscapeStructure, ScaleWarning, Segment, Site, SiteKind,
                        fleet_size_warnings, validate_structure)
from .work_os import MultiplexScheme

COUPLING_MODES = ("none", "all")
DEFAULT_TASK_KIND = Capability.STRUCTURE_ASSEMBLY.value
_TOL_FT = 1e-6

STRATEGY_ALIASES = {"broker": CStrategy.BROKER, "leader": CStrategy.LEADER_ELECTION}
SCHEME_ALIASES = {
    "rr": MultiplexScheme.ROUND_ROBIN,
    "weighted": MultiplexScheme.WEIGHTED_BY_REMAINING_WORK,
    "priority": MultiplexScheme.PRIORITY_BY_GOAL_DEPTH,
}


class ScenarioError(ValueError):
    def __init__(self, field: str, message: str, line: int | None = None):
        self.field = field
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{field}: {message}")


@dataclass(frozen=True)
class Scenario:
    structure: LandscapeStructure
    sites: tuple[Site, ...]
    fleet: tuple[PhysicalDrone, ...]
    compartment_policy: CompartmentPolicy = FixedCount(1)
    coordination: CStrategy = CStrategy.LEADER_ELECTION
    multiplex: MultiplexScheme = MultiplexScheme.ROUND_ROBIN
    ilities: tuple[Ility, ...] = CORE_ILITIES
    fanout: tuple[int, ...] = DEFAULT_FANOUT
    coupling: str = "none"
    tick_hours: float = 0.1
    c_phase_overhead_ticks: int = 0
    stall_limit: int = 100
    stigmergy_ttl: int = 2
    tether_rule: bool = True
    tether_reach_ft: float = DEFAULT_TETHER_REACH_FT
    max_tethered_per_anchor: int = DEFAULT_MAX_TETHERED_PER_ANCHOR
    ferry_capacity: int = DEFAULT_FERRY_CAPACITY
    travel_ticks: Mapping[tuple[str, str], int] = field(default_factory=dict)
    cost_rates: Mapping[str, float] = field(default_factory=dict)
    tether_fixed_cost: float = 5.0
    budget_max_hours: float = 10.0
    seed: int = 0

    @property
    def fleet_spec(self) -> tuple[PhysicalDrone, ...]:
        return self.fleet

    def site(self, site_id: str) -> Site:
        for s in self.sites:
            if s.id == site_id:
                return s
        raise KeyError(site_id)

    def cost_rate(self, role: DroneRole) -> float:
        return float(self.cost_rates.get(role.value, 1.0))


# -- parsing helpers ---------------------------------------------------------

def _get(obj: Mapping, key: str, path: str, default: Any = ..., types: tuple = ()) -> Any:
    if key not in obj:
        if default is ...:
            raise ScenarioError(f"{path}.{key}" if path else key, "missing required field")
        return default
    value = obj[key]
    if types and not isinstance(value, types) or (isinstance(value, bool) and bool not in types and types):
        names = "/".join(t.__name__ for t in types)
        raise ScenarioError(f"{path}.{key}" if path else key, f"expected {names}, got {type(value).__name__}")
    return value


def _no_extra(obj: Mapping, allowed: set[str], path: str) -> None:
    extra = sorted(set(obj) - allowed)
    if extra:
        raise ScenarioError(f"{path}.{extra[0]}" if path else extra[0], "unknown field")


def _nonneg_int(value: Any, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < 0:
        raise ScenarioError(path, f"must be a non-negative integer, got {value!r}")
    return value


def _pos_number(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not value > 0:
        raise ScenarioError(path, f"must be a number > 0, got {value!r}")
    return float(value)


def _enum(enum_cls, value: Any, path: str, aliases: Mapping[str, Any] | None = None):
    if aliases and isinstance(value, str) and value.lower() in aliases:
        return aliases[value.lower()]
    try:
        return enum_cls(value)
    except ValueError:
        choices = [e.value for e in enum_cls] + sorted(aliases or {})
        raise ScenarioError(path, f"unknown value {value!r}; expected one of {choices}") from None


NUM = (int, float)


def _parse_segments(raw: Any) -> LandscapeStructure:
    if not isinstance(raw, Mapping):
        raise ScenarioError("structure", "expected an object")
    _no_extra(raw, {"segments"}, "structure")
    segs_raw = _get(raw, "segments", "structure", types=(list,))
    if not segs_raw:
        raise ScenarioError("structure.segments", "at least one segment is required")
    segments = []
    cursor = 0.0
    for i, s in enumerate(segs_raw):
        p = f"structure.segments[{i}]"
        if not isinstance(s, Mapping):
            raise ScenarioError(p, "expected an object")
        _no_extra(s, {"id", "start_ft", "length_ft", "height_ft", "width_ft", "work_required",
                      "payload_required"}, p)
        sid = _get(s, "id", p, i, (int,))
        if sid != i:
            raise ScenarioError(f"{p}.id", f"segment ids must be ordinals 0..n-1 in order, expected {i}, got {sid}")
        length = _pos_number(_get(s, "length_ft", p), f"{p}.length_ft")
        start = float(_get(s, "start_ft", p, cursor, NUM))
        if abs(start - cursor) > _TOL_FT:
            raise ScenarioError(f"{p}.start_ft",
                                f"segment {i} starts at {start:g} ft but segment {i - 1} ends at {cursor:g} ft "
                                "(segments must be contiguous)" if i else
                                f"segment 0 must start at 0 ft, got {start:g}")
        height = float(_get(s, "height_ft", p, 0.0, NUM))
        width = float(_get(s, "width_ft", p, 0.0, NUM))
        if height < 0 or width < 0:
            raise ScenarioError(p, "height_ft and width_ft must be >= 0")
        work_raw = _get(s, "work_required", p, 0)
        if isinstance(work_raw, Mapping):
            work = {}
            for kind, units in sorted(work_raw.items()):
                _enum(Capability, kind, f"{p}.work_required.{kind}")
                work[kind] = _nonneg_int(units, f"{p}.work_required.{kind}")
        else:
            units = _nonneg_int(work_raw, f"{p}.work_required")
            work = {DEFAULT_TASK_KIND: units} if units else {}
        payload = _nonneg_int(_get(s, "payload_required", p, 0), f"{p}.payload_required")
        segments.append(Segment(i, start, length, height, width, work, payload))
        cursor = start + length
    return LandscapeStructure(tuple(segments))


def _parse_sites(raw: Any) -> tuple[Site, ...]:
    if not isinstance(raw, list):
        raise ScenarioError("sites", "expected a list")
    sites = []
    seen = set()
    for i, s in enumerate(raw):
        p = f"sites[{i}]"
        if not isinstance(s, Mapping):
            raise ScenarioError(p, "expected an object")
        _no_extra(s, {"id", "kind", "inventory", "position_ft"}, p)
        sid = _get(s, "id", p, types=(str,))
        if sid in seen:
            raise ScenarioError(f"{p}.id", f"duplicate site id {sid!r}")
        seen.add(sid)
        kind = _enum(SiteKind, _get(s, "kind", p), f"{p}.kind")
        inv = _nonneg_int(_get(s, "inventory", p, 0), f"{p}.inventory")
        pos = _get(s, "position_ft", p, None)
        if pos is not None and (isinstance(pos, bool) or not isinstance(pos, NUM)):
            raise ScenarioError(f"{p}.position_ft", "must be a number or null")
        sites.append(Site(sid, kind, inv, None if pos is None else float(pos)))
    counts = {k: sum(1 for s in sites if s.kind is k) for k in SiteKind}
    if counts[SiteKind.CENTRAL_HQ] != 1:
        raise ScenarioError("sites", f"exactly one CentralHQ is required, found {counts[SiteKind.CENTRAL_HQ]}")
    for k in (SiteKind.SUPPLY_STATION, SiteKind.FIELD_STAGING_AREA):
        if counts[k] == 0:
            raise ScenarioError("sites", f"at least one {k.value} site is required")
    return tuple(sites)


def _parse_power(raw: Any, p: str) -> Battery | Tethered:
    if raw is None:
        return Battery()
    if not isinstance(raw, Mapping):
        raise ScenarioError(p, "expected an object")
    kind = _get(raw, "type", p, types=(str,))
    if kind == "battery":
        _no_extra(raw, {"type", "capacity_hours", "recharge_ticks"}, p)
        cap = _pos_number(_get(raw, "capacity_hours", p, 1.0), f"{p}.capacity_hours")
        rt = _nonneg_int(_get(raw, "recharge_ticks", p, 1), f"{p}.recharge_ticks")
        return Battery(cap, rt)
    if kind == "tethered":
        _no_extra(raw, {"type", "anchor_site", "reach_ft"}, p)
        anchor = _get(raw, "anchor_site", p, types=(str,))
        reach = _pos_number(_get(raw, "reach_ft", p, DEFAULT_TETHER_REACH_FT), f"{p}.reach_ft")
        return Tethered(anchor, reach)
    raise ScenarioError(f"{p}.type", f"expected 'battery' or 'tethered', got {kind!r}")


def _parse_fleet(raw: Any, sites: tuple[Site, ...], n_segments: int) -> tuple[PhysicalDrone, ...]:
    if not isinstance(raw, list) or not raw:
        raise ScenarioError("fleet", "expected a non-empty list of drones")
    site_ids = {s.id for s in sites}
    drones = []
    seen = set()
    for i, d in enumerate(raw):
        p = f"fleet[{i}]"
        if not isinstance(d, Mapping):
            raise ScenarioError(p, "expected an object")
        _no_extra(d, {"id", "role", "capabilities", "work_rate", "power", "location"}, p)
        did = _get(d, "id", p, types=(str,))
        if did in seen:
            raise ScenarioError(f"{p}.id", f"duplicate drone id {did!r}")
        seen.add(did)
        role = _enum(DroneRole, _get(d, "role", p), f"{p}.role")
        caps_raw = _get(d, "capabilities", p, [], (list,))
        caps = frozenset(_enum(Capability, c, f"{p}.capabilities[{j}]") for j, c in enumerate(caps_raw))
        if role in (DroneRole.FIELD_OPERATION, DroneRole.FERRY_TAXI) and not caps:
            raise ScenarioError(f"{p}.capabilities", f"{role.value} drones need at least one capability")
        rate = _get(d, "work_rate", p, 1)
        if isinstance(rate, bool) or not isinstance(rate, int) or rate <= 0:
            raise ScenarioError(f"{p}.work_rate", f"must be an integer > 0, got {rate!r}")
        power = _parse_power(d.get("power"), f"{p}.power")
        if isinstance(power, Tethered) and power.anchor_site not in site_ids:
            raise ScenarioError(f"{p}.power.anchor_site", f"unknown site {power.anchor_site!r}")
        loc = d.get("location")
        if isinstance(loc, bool) or (loc is not None and not isinstance(loc, (int, str))):
            raise ScenarioError(f"{p}.location", "must be a site id, a segment id or null")
        if isinstance(loc, int) and not 0 <= loc < n_segments:
            raise ScenarioError(f"{p}.location", f"unknown segment {loc}")
        if isinstance(loc, str) and loc not in site_ids:
            raise ScenarioError(f"{p}.location", f"unknown site {loc!r}")
        drones.append(PhysicalDrone(did, role, caps, rate, power, loc))
    return tuple(drones)


def _parse_compartment_policy(raw: Any, n_segments: int) -> CompartmentPolicy:
    p = "policies.compartment"
    if raw is None:
        return FixedCount(1)
    if not isinstance(raw, Mapping):
        raise ScenarioError(p, "expected an object")
    kind = _get(raw, "type", p, types=(str,))
    if kind in ("FixedCount", "UniformWork"):
        _no_extra(raw, {"type", "k"}, p)
        k = _get(raw, "k", p, types=(int,))
        if k < 1:
            raise ScenarioError(f"{p}.k", f"must be >= 1, got {k}")
        if k > n_segments:
            raise ScenarioError(f"{p}.k", f"K={k} exceeds segment count {n_segments}")
        return FixedCount(k) if kind == "FixedCount" else UniformWork(k)
    if kind == "UniformLength":
        _no_extra(raw, {"type", "target_ft"}, p)
        return UniformLength(_pos_number(_get(raw, "target_ft", p), f"{p}.target_ft"))
    raise ScenarioError(f"{p}.type", f"unknown compartment policy {kind!r}")


_POLICY_KEYS = {
    "compartment", "coordination", "multiplex", "ilities", "fanout", "coupling", "tick_hours",
    "c_phase_overhead_ticks", "stall_limit", "stigmergy_ttl", "tether_rule", "tether_reach_ft",
    "max_tethered_per_anchor", "ferry_capacity", "travel_ticks", "cost_rates", "tether_fixed_cost",
}


def scenario_from_dict(doc: Any) -> Scenario:
    """Validate a decoded scenario document and build a :class:`Scenario`."""
    if not isinstance(doc, Mapping):
        raise ScenarioError("<root>", "scenario must be a JSON object")
    _no_extra(doc, {"structure", "sites", "fleet", "policies", "budgets", "seed"}, "")
    structure = _parse_segments(_get(doc, "structure", ""))
    n_seg = len(structure.segments)
    sites = _parse_sites(_get(doc, "sites", ""))
    fleet = _parse_fleet(_get(doc, "fleet", ""), sites, n_seg)
    pol = _get(doc, "policies", "", {}, (dict,))
    _no_extra(pol, _POLICY_KEYS, "policies")
    P = "policies"

    ilities_raw = _get(pol, "ilities", P, [i.value for i in CORE_ILITIES], (list,))
    ilities = tuple(_enum(Ility, v, f"{P}.ilities[{j}]") for j, v in enumerate(ilities_raw))
    if not ilities:
        raise ScenarioError(f"{P}.ilities", "ility set must not be empty")
    if len(set(ilities)) != len(ilities):
        raise ScenarioError(f"{P}.ilities", "ility names must be unique")
    fanout = tuple(_get(pol, "fanout", P, list(DEFAULT_FANOUT), (list,)))
    if len(fanout) != 5 or any(isinstance(f, bool) or not isinstance(f, int) or f < 1 for f in fanout):
        raise ScenarioError(f"{P}.fanout", f"needs 5 integers >= 1, got {list(fanout)}")
    coupling = _get(pol, "coupling", P, "none", (str,))
    if coupling not in COUPLING_MODES:
        raise ScenarioError(f"{P}.coupling", f"expected one of {list(COUPLING_MODES)}, got {coupling!r}")

    site_ids = {s.id for s in sites}
    travel: dict[tuple[str, str], int] = {}
    for j, leg in enumerate(_get(pol, "travel_ticks", P, [], (list,))):
        lp = f"{P}.travel_ticks[{j}]"
        if not isinstance(leg, Mapping):
            raise ScenarioError(lp, "expected an object")
        _no_extra(leg, {"from", "to", "ticks"}, lp)
        a, b = _get(leg, "from", lp, types=(str,)), _get(leg, "to", lp, types=(str,))
        for key, sid in (("from", a), ("to", b)):
            if sid not in site_ids:
                raise ScenarioError(f"{lp}.{key}", f"unknown site {sid!r}")
        ticks = _get(leg, "ticks", lp, types=(int,))
        if ticks < 1:
            raise ScenarioError(f"{lp}.ticks", "must be >= 1")
        travel[(a, b)] = ticks

    rates_raw = _get(pol, "cost_rates", P, {}, (dict,))
    rates = {}
    for role, rate in sorted(rates_raw.items()):
        _enum(DroneRole, role, f"{P}.cost_rates.{role}")
        if isinstance(rate, bool) or not isinstance(rate, NUM) or rate < 0:
            raise ScenarioError(f"{P}.cost_rates.{role}", "must be a number >= 0")
        rates[role] = float(rate)

    tether_cost = _get(pol, "tether_fixed_cost", P, 5.0, NUM)
    if tether_cost < 0:
        raise ScenarioError(f"{P}.tether_fixed_cost", "must be >= 0")
    stall_limit = _get(pol, "stall_limit", P, 100, (int,))
    if stall_limit < 1:
        raise ScenarioError(f"{P}.stall_limit", "must be >= 1")
    ttl = _get(pol, "stigmergy_ttl", P, 2, (int,))
    if ttl < 1:
        raise ScenarioError(f"{P}.stigmergy_ttl", "must be >= 1")
    max_anchor = _get(pol, "max_tethered_per_anchor", P, DEFAULT_MAX_TETHERED_PER_ANCHOR, (int,))
    if max_anchor < 1:
        raise ScenarioError(f"{P}.max_tethered_per_anchor", "must be >= 1")
    ferry_cap = _get(pol, "ferry_capacity", P, DEFAULT_FERRY_CAPACITY, (int,))
    if ferry_cap < 1:
        raise ScenarioError(f"{P}.ferry_capacity", "must be >= 1")

    budgets = _get(doc, "budgets", "", {}, (dict,))
    _no_extra(budgets, {"max_hours"}, "budgets")
    seed = _get(doc, "seed", "", 0)
    seed = _nonneg_int(seed, "seed")

    return Scenario(
        structure=structure,
        sites=sites,
        fleet=fleet,
        compartment_policy=_parse_compartment_policy(pol.get("compartment"), n_seg),
        coordination=_enum(CStrategy, _get(pol, "coordination", P, CStrategy.LEADER_ELECTION.value),
                           f"{P}.coordination", STRATEGY_ALIASES),
        multiplex=_enum(MultiplexScheme, _get(pol, "multiplex", P, MultiplexScheme.ROUND_ROBIN.value),
                        f"{P}.multiplex", SCHEME_ALIASES),
        ilities=ilities,
        fanout=fanout,
        coupling=coupling,
        tick_hours=_pos_number(_get(pol, "tick_hours", P, 0.1), f"{P}.tick_hours"),
        c_phase_overhead_ticks=_nonneg_int(_get(pol, "c_phase_overhead_ticks", P, 0), f"{P}.c_phase_overhead_ticks"),
        stall_limit=stall_limit,
        stigmergy_ttl=ttl,
        tether_rule=bool(_get(pol, "tether_rule", P, True, (bool,))),
        tether_reach_ft=_pos_number(_get(pol, "tether_reach_ft", P, DEFAULT_TETHER_REACH_FT), f"{P}.tether_reach_ft"),
        max_tethered_per_anchor=max_anchor,
        ferry_capacity=ferry_cap,
        travel_ticks=travel,
        cost_rates=rates,
        tether_fixed_cost=float(tether_cost),
        budget_max_hours=_pos_number(_get(budgets, "max_hours", "budgets", 10.0), "budgets.max_hours"),
        seed=seed,
    )


def loads_scenario(text: str) -> Scenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError("<json>", exc.msg, line=exc.lineno) from None
    return scenario_from_dict(doc)


def load_scenario(path: str | Path) -> Scenario:
    """Read, parse and validate a scenario file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError("<file>", f"cannot read {path}: {exc.strerror}") from None
    return loads_scenario(text)


def _power_to_dict(power: Battery | Tethered) -> dict[str, Any]:
    if isinstance(power, Tethered):
        return {"type": "tethered", "anchor_site": power.anchor_site, "reach_ft": power.reach_ft}
    return {"type": "battery", "capacity_hours": power.capacity_hours, "recharge_ticks": power.recharge_ticks}


def _policy_to_dict(policy: CompartmentPolicy) -> dict[str, Any]:
    if isinstance(policy, UniformLength):
        return {"type": "UniformLength", "target_ft": policy.target_ft}
    return {"type": type(policy).__name__, "k": policy.k}


def scenario_to_dict(sc: Scenario) -> dict[str, Any]:
    """Serialize with every default written out, so reloading gives an equal Scenario."""
    return {
        "structure": {"segments": [
            {"id": s.id, "start_ft": s.start_ft, "length_ft": s.length_ft, "height_ft": s.height_ft,
             "width_ft": s.width_ft, "work_required": dict(s.work_required),
             "payload_required": s.payload_required}
            for s in sc.structure.segments]},
        "sites": [{"id": s.id, "kind": s.kind.value, "inventory": s.inventory, "position_ft": s.position_ft}
                  for s in sc.sites],
        "fleet": [{"id": d.id, "role": d.role.value,
                   "capabilities": sorted(c.value for c in d.capabilities),
                   "work_rate": d.work_rate, "power": _power_to_dict(d.power), "location": d.location}
                  for d in sc.fleet],
        "policies": {
            "compartment": _policy_to_dict(sc.compartment_policy),
            "coordination": sc.coordination.value,
            "multiplex": sc.multiplex.value,
            "ilities": [i.value for i in sc.ilities],
            "fanout": list(sc.fanout),
            "coupling": sc.coupling,
            "tick_hours": sc.tick_hours,
            "c_phase_overhead_ticks": sc.c_phase_overhead_ticks,
            "stall_limit": sc.stall_limit,
            "stigmergy_ttl": sc.stigmergy_ttl,
            "tether_rule": sc.tether_rule,
            "tether_reach_ft": sc.tether_reach_ft,
            "max_tethered_per_anchor": sc.max_tethered_per_anchor,
            "ferry_capacity": sc.ferry_capacity,
            "travel_ticks": [{"from": a, "to": b, "ticks": t}
                             for (a, b), t in sorted(sc.travel_ticks.items(),
                                                     key=lambda kv: (natural_key(kv[0][0]), natural_key(kv[0][1])))],
            "cost_rates": dict(sc.cost_rates),
            "tether_fixed_cost": sc.tether_fixed_cost,
        },
        "budgets": {"max_hours": sc.budget_max_hours},
        "seed": sc.seed,
    }


def dump_scenario(sc: Scenario, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(sc), indent=2) + "\n", encoding="utf-8")


def scenario_warnings(sc: Scenario) -> list[ScaleWarning]:
    """Advisory scale warnings for the structure and the fleet size."""
    return validate_structure(sc.structure) + fleet_size_warnings(len(sc.fleet))


def reference_scenario_path() -> Path:
    """Location of the shipped ``mile1.scenario`` reference file."""
    return Path(__file__).parent / "data" / "mile1.scenario"
