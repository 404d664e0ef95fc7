"""Discrete-event kernel for the alternating coordination / work process.

A run starts with a C* phase (initial grants and bindings) and then
alternates E* work phases with C* coordination phases until every virtual
drone's work is done or no progress happens for ``stall_limit`` E* phases.
Logical time is tick-quantized and single-threaded; compartments are
advanced in ascending id order.
"""

from __future__ import annotations

import copy
import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Sequence

from ._util import canonical_json, ceil_div, digest, natural_key
from .compartments import (CompartmentPlan, IntersectionRelation, PlanningError, assign_sites,
                           compartmentalize, derive_intersections, relation_keys, resources_of)
from .coordination import (CStrategy, Grant, ResourceRequest, StigmergyBoard, broker_resolve,
                           elect_leader, leader_resolve, post_and_aggregate)
from .fleet import (Capability, DroneRole, PhysicalDrone, Tethered, VirtualDrone, advance_power_state,
                    apply_tether_rule, capability_match, is_runnable)
from .goals import GoalTree, build_goal_trees, expand_virtual_fleet
from .logistics import (Ferry, LogisticsOrder, WorkflowLattice, build_lattice, create_orders,
                        dispatch_ferries, in_transit)
from .scenario import Scenario, scenario_to_dict, scenario_warnings
from .structure import ScaleWarning, Site
from .work_os import Binding, bind_phase, compute_runnable

log = logging.getLogger(__name__)

C_STAR = "C"
E_STAR = "E"


@dataclass
class Plan:
    """Everything the planning pipeline derives from a scenario before simulation."""

    scenario: Scenario
    compartments: CompartmentPlan
    sites: tuple[Site, ...]
    relations: list[IntersectionRelation]
    goal_trees: dict[int, list[GoalTree]]
    virtuals: list[VirtualDrone]
    drones: dict[str, PhysicalDrone]
    drone_compartment: dict[str, int]
    lattice: WorkflowLattice
    orders: list[LogisticsOrder]
    warnings: list[ScaleWarning] = field(default_factory=list)

    def can_serve(self, virtual: VirtualDrone, physical: PhysicalDrone) -> bool:
        """Capability match, compartment confinement and tether reach."""
        if not capability_match(virtual, physical):
            return False
        if self.drone_compartment.get(physical.id) != virtual.compartment_id:
            return False
        return self.within_reach(physical, virtual.compartment_id)

    def within_reach(self, physical: PhysicalDrone, cid: int) -> bool:
        power = physical.power
        if not isinstance(power, Tethered):
            return True
        anchor = next((s for s in self.sites if s.id == power.anchor_site), None)
        if anchor is None or anchor.position_ft is None:
            return True
        comp = self.compartments.by_id(cid)
        far = max(abs(anchor.position_ft - comp.start_ft), abs(anchor.position_ft - comp.end_ft))
        return far <= power.reach_ft + 1e-9

    def goal_trees_dict(self) -> dict[str, list[dict]]:
        return {str(cid): [t.to_dict() for t in trees] for cid, trees in sorted(self.goal_trees.items())}

    def to_dict(self) -> dict[str, Any]:
        keys = relation_keys(self.relations)
        return {
            "compartments": [
                {"id": c.id, "segments": [c.first_segment, c.last_segment], "total_work": c.total_work,
                 "task_kind": c.task_kind, "payload_demand": c.payload_demand,
                 "staging_site": c.staging_site, "fieldops_site": c.fieldops_site}
                for c in self.compartments.compartments],
            "intersections": [{"key": k, "members": list(r.members), "shared_resources": list(r.shared_resources)}
                              for k, r in keys.items()],
            "lattice": {"forward": [list(e) for e in self.lattice.forward_edges],
                        "reverse": [list(e) for e in self.lattice.reverse_edges]},
            "fleet": [
                {"id": d.id, "role": d.role.value, "compartment": self.drone_compartment.get(d.id),
                 "power": "tethered" if d.tethered else "battery",
                 "anchor": d.power.anchor_site if d.tethered else None}
                for d in sorted(self.drones.values(), key=lambda d: natural_key(d.id))],
            "virtual_fleet": [
                {"id": v.id, "compartment": v.compartment_id, "leaf": v.leaf_goal_id,
                 "capability": v.required_capability.value, "work": v.remaining_work,
                 "resources": sorted(v.required_resources, key=natural_key)}
                for v in self.virtuals],
            "orders": [{"id": o.id, "origin": o.origin, "destination": o.destination, "quantity": o.quantity,
                        "compartment": o.compartment_id} for o in self.orders],
            "goal_trees": self.goal_trees_dict(),
            "warnings": [w.code for w in self.warnings],
        }


def _confine_field_drones(plan: CompartmentPlan, drones: Sequence[PhysicalDrone]) -> dict[str, int]:
    """Pin each FieldOperation drone to one compartment.

    Segment and FieldOps/staging locations decide directly; the rest go to
    the compartment with the fewest drones so far (lowest id on ties).
    """
    fieldops = {c.fieldops_site: c.id for c in plan.compartments}
    staging: dict[str, int] = {}
    for c in plan.compartments:
        staging.setdefault(c.staging_site, c.id)
    out: dict[str, int] = {}
    unplaced = []
    for d in sorted(drones, key=lambda d: natural_key(d.id)):
        if d.role is not DroneRole.FIELD_OPERATION:
            continue
        if isinstance(d.location, int):
            out[d.id] = plan.compartment_of_segment(d.location).id
        elif d.location in fieldops:
            out[d.id] = fieldops[d.location]
        elif d.location in staging:
            out[d.id] = staging[d.location]
        else:
            unplaced.append(d)
    counts = defaultdict(int)
    for cid in out.values():
        counts[cid] += 1
    for d in unplaced:
        cid = min((c.id for c in plan.compartments), key=lambda c: (counts[c], c))
        out[d.id] = cid
        counts[cid] += 1
    return out


def _plan_power(sc: Scenario, plan: CompartmentPlan, drones: dict[str, PhysicalDrone],
                confined: dict[str, int]) -> dict[str, PhysicalDrone]:
    """Apply the tether rule from each compartment's planned continuous duty."""
    out = dict(drones)
    if sc.tether_rule:
        for comp in plan.compartments:
            need = Capability(comp.task_kind)
            crew = [drones[d] for d, c in sorted(confined.items(), key=lambda kv: natural_key(kv[0]))
                    if c == comp.id and need in drones[d].capabilities]
            rate = sum(d.work_rate for d in crew)
            if not crew or comp.total_work == 0:
                continue
            hours = ceil_div(comp.total_work, rate) * sc.tick_hours
            for d in crew:
                anchor = d.power.anchor_site if d.tethered else comp.fieldops_site
                power = apply_tether_rule(d, hours, anchor, d.power.reach_ft if d.tethered else sc.tether_reach_ft)
                out[d.id] = replace(d, power=power)
    per_anchor = defaultdict(list)
    for d in out.values():
        if d.tethered:
            per_anchor[d.power.anchor_site].append(d.id)
    for anchor, ids in sorted(per_anchor.items()):
        if len(ids) > sc.max_tethered_per_anchor:
            raise PlanningError(
                f"anchor site {anchor!r} would hold {len(ids)} tethered drones "
                f"(max_tethered_per_anchor={sc.max_tethered_per_anchor}): {sorted(ids, key=natural_key)}")
    return out


def plan_scenario(sc: Scenario) -> Plan:
    """Run the planning pipeline: compartments, couplings, goal trees, fleet, logistics."""
    comp_plan = compartmentalize(sc.structure, sc.compartment_policy)
    comp_plan, sites = assign_sites(comp_plan, sc.sites)
    relations = derive_intersections(comp_plan, sites)
    trees = {c.id: build_goal_trees(c, sc.ilities, sc.fanout) for c in comp_plan.compartments}
    confined = _confine_field_drones(comp_plan, sc.fleet)
    drones = _plan_power(sc, comp_plan, {d.id: d for d in sc.fleet}, confined)
    required = {}
    if sc.coupling == "all":
        required = {cid: frozenset(rs) for cid, rs in resources_of(relations).items()}
    virtuals = expand_virtual_fleet(comp_plan, trees, list(drones.values()),
                                    drone_compartments=confined, required_resources=required)
    lattice = build_lattice(sites)
    orders = create_orders(comp_plan, lattice)
    plan = Plan(sc, comp_plan, sites, relations, trees, virtuals, drones, confined, lattice, orders,
                scenario_warnings(sc))
    for d in drones.values():
        if d.id in confined and d.tethered and not plan.within_reach(d, confined[d.id]):
            log.warning("tethered drone %s cannot reach compartment %s", d.id, confined[d.id])
    return plan


@dataclass(frozen=True)
class AccessEntry:
    phase: int
    reader: int
    owner: int
    key: str


class AccessLog:
    """Records which compartment's state each E* compartment step reads."""

    def __init__(self) -> None:
        self.entries: list[AccessEntry] = []

    def record(self, phase: int, reader: int, owner: int, key: str) -> None:
        self.entries.append(AccessEntry(phase, reader, owner, key))

    def cross_reads(self) -> list[AccessEntry]:
        return [e for e in self.entries if e.reader != e.owner]


class _CompartmentScope:
    # every read of compartment-owned state during E* goes through here
    def __init__(self, sim: Simulation, reader: int, phase: int):
        self._sim = sim
        self._reader = reader
        self._phase = phase

    def _touch(self, owner: int, key: str) -> None:
        if self._sim.access_log is not None:
            self._sim.access_log.record(self._phase, self._reader, owner, key)

    def virtuals(self, owner: int) -> list[VirtualDrone]:
        self._touch(owner, "virtuals")
        return self._sim.virtuals_by_comp[owner]

    def drone(self, drone_id: str) -> PhysicalDrone:
        self._touch(self._sim.plan.drone_compartment[drone_id], f"drone:{drone_id}")
        return self._sim.drones[drone_id]

    def crew(self, owner: int) -> list[str]:
        self._touch(owner, "crew")
        return self._sim.crew_by_comp[owner]

    def payload_need(self, owner: int) -> int:
        self._touch(owner, "payload_need")
        return self._sim.payload_need[owner]

    def inventory(self, owner: int) -> int:
        self._touch(owner, "inventory")
        return self._sim.inventory[self._sim.fieldops_of[owner]]


@dataclass(frozen=True)
class PhaseRecord:
    index: int
    kind: str
    clock_hours: float
    data: dict[str, Any]

    def to_dict(self) -> dict[str, Any]:
        return {"phase": self.index, "kind": self.kind, "clock_hours": self.clock_hours, **self.data}


@dataclass
class PhaseTrace:
    records: list[PhaseRecord]
    seed: int
    scenario_digest: str
    meta: dict[str, Any] = field(default_factory=dict)

    def kinds(self) -> str:
        return "".join(r.kind for r in self.records)

    def to_ndjson(self) -> str:
        return "".join(canonical_json(r.to_dict()) + "\n" for r in self.records)

    def digest(self) -> str:
        return digest([r.to_dict() for r in self.records])


class Simulation:
    """Mutable run state plus the phase steps that advance it."""

    def __init__(self, scenario: Scenario, *, debug: bool = False, plan: Plan | None = None):
        self.scenario = scenario
        self.plan = plan or plan_scenario(scenario)
        self.tick = scenario.tick_hours
        self.drones: dict[str, PhysicalDrone] = dict(self.plan.drones)
        self.virtuals = copy.deepcopy(self.plan.virtuals)
        self.virtuals_by_comp: dict[int, list[VirtualDrone]] = {c.id: [] for c in self.plan.compartments.compartments}
        for v in self.virtuals:
            self.virtuals_by_comp[v.compartment_id].append(v)
        self.crew_by_comp: dict[int, list[str]] = {cid: [] for cid in self.virtuals_by_comp}
        for pid, cid in sorted(self.plan.drone_compartment.items(), key=lambda kv: natural_key(kv[0])):
            self.crew_by_comp[cid].append(pid)
        self.fieldops_of = {c.id: c.fieldops_site for c in self.plan.compartments.compartments}
        self.site_owner = {site: cid for cid, site in self.fieldops_of.items()}
        self.inventory: dict[str, int] = {s.id: s.inventory for s in self.plan.sites}
        self.initial_production = sum(self.inventory.values())
        self.orders = copy.deepcopy(self.plan.orders)
        self.ferries = [Ferry(d.id, d.location if isinstance(d.location, str) else self.plan.lattice.hq,
                              scenario.ferry_capacity)
                        for d in sorted(self.drones.values(), key=lambda d: natural_key(d.id)) if d.is_ferry]
        self.payload_need = {c.id: min(c.payload_demand, c.total_work) for c in self.plan.compartments.compartments}
        self.consumed = 0
        self.work_by_drone: dict[str, int] = defaultdict(int)
        self.board = StigmergyBoard()
        self.relation_keys = relation_keys(self.plan.relations)
        self.grants: list[Grant] = []
        self.last_requests: list[ResourceRequest] = []
        self.binding = Binding(0, ())
        self.records: list[PhaseRecord] = []
        self.access_log = AccessLog() if debug else None
        self.c_count = 0
        self.e_count = 0
        self.idle_streak = 0
        self.starvation_events: list[dict[str, int]] = []
        self.last_starved: set[int] = set()
        self.stall: dict[str, Any] | None = None

    # -- state queries -------------------------------------------------------

    @property
    def clock_hours(self) -> float:
        ticks = self.e_count + self.c_count * self.scenario.c_phase_overhead_ticks
        return round(ticks * self.tick, 9)

    def remaining(self, cid: int) -> int:
        return sum(v.remaining_work for v in self.virtuals_by_comp[cid])

    def total_remaining(self) -> int:
        return sum(v.remaining_work for v in self.virtuals)

    def is_complete(self) -> bool:
        return all(v.remaining_work == 0 for v in self.virtuals)

    def payload_balance(self) -> int:
        """Sites + in transit + consumed; equals the initial production at every phase."""
        return sum(self.inventory.values()) + in_transit(self.ferries) + self.consumed

    def _next_index(self) -> int:
        return len(self.records)

    # -- C* ------------------------------------------------------------------

    def _requests(self, phase: int) -> list[ResourceRequest]:
        out = []
        for cid, vs in self.virtuals_by_comp.items():
            needed = set()
            for v in vs:
                if v.remaining_work > 0:
                    needed |= v.required_resources
            rem = self.remaining(cid)
            out += [ResourceRequest(cid, r, rem, phase) for r in sorted(needed, key=natural_key)]
        return out

    def step_c_phase(self) -> PhaseRecord:
        """Purge/post the board, arbitrate shared resources and rebind for the next E* phase."""
        if self.records and self.records[-1].kind == C_STAR:
            raise RuntimeError("C* phase must follow an E* phase")
        q = self.c_count
        messages = [(f"{key}/c{cid}.remaining", self.remaining(cid))
                    for key, rel in self.relation_keys.items() for cid in rel.members]
        _, board_digest = post_and_aggregate(self.board, messages, q, self.scenario.stigmergy_ttl)

        requests = self._requests(q)
        leaders = {}
        if self.scenario.coordination is CStrategy.BROKER:
            grants, orders = broker_resolve(requests)
        else:
            grants, orders = leader_resolve(self.plan.relations, requests, q)
            leaders = {key: elect_leader(rel, q) for key, rel in self.relation_keys.items()}
        self.grants = grants
        self.last_requests = requests

        pairs: list[tuple[str, str]] = []
        for cid, vs in self.virtuals_by_comp.items():
            crew = [self.drones[p] for p in self.crew_by_comp[cid]]
            runnable = compute_runnable(vs, grants, crew, self.tick, self.plan.can_serve)
            available = [p for p in crew if is_runnable(p, self.tick)]
            pairs += bind_phase(self.e_count, runnable, available, self.scenario.multiplex,
                                self.plan.can_serve).pairs
        pairs.sort(key=lambda pv: natural_key(pv[0]))
        self.binding = Binding(self.e_count, tuple(pairs))
        by_id = {v.id: v for v in self.virtuals}
        for p, v in pairs:
            by_id[v].bind(self.drones[p])

        self.c_count += 1
        rec = PhaseRecord(self._next_index(), C_STAR, self.clock_hours, {
            "cstar": q,
            "requests": [[r.compartment_id, r.resource_id, r.remaining_work] for r in requests],
            "grants": [[g.resource_id, g.grantee] for g in grants],
            "orders": [[o.issuer, o.target, o.directive, o.resource_id] for o in orders],
            "leaders": leaders,
            "digest": board_digest,
        })
        self.records.append(rec)
        return rec

    # -- E* ------------------------------------------------------------------

    def _advance_compartment(self, cid: int, scope: _CompartmentScope, bound: dict[str, str],
                             busy: set[str], work: list, starved: list[int]) -> tuple[int, int]:
        done = consumed = 0
        fieldops = self.fieldops_of[cid]
        for v in scope.virtuals(cid):
            pid = bound.get(v.id)
            if pid is None:
                continue
            p = scope.drone(pid)
            units = min(p.work_rate, v.remaining_work)
            need = scope.payload_need(cid)
            if need > 0 and units > 0:
                with_payload = min(units, need)
                stock = scope.inventory(cid)
                if stock < with_payload:
                    units = stock
                    with_payload = stock
                    if cid not in starved:
                        starved.append(cid)
                self.inventory[fieldops] -= with_payload
                self.payload_need[cid] -= with_payload
                consumed += with_payload
            if units > 0:
                v.remaining_work -= units
                done += units
                self.work_by_drone[pid] += units
            work.append([pid, v.id, units])
        for pid in scope.crew(cid):
            self.drones[pid] = advance_power_state(scope.drone(pid), pid in busy, self.tick)
        return done, consumed

    def step_e_phase(self) -> PhaseRecord:
        """Advance every compartment independently, then move ferries and power states."""
        if not self.records or self.records[-1].kind != C_STAR:
            raise RuntimeError("E* phase must follow a C* phase")
        index = self._next_index()
        bound = {v: p for p, v in self.binding.pairs}
        busy = set(bound.values())
        twins = {v.id: {"physical": v.bound_physical, **v.twin_state}
                 for v in self.virtuals if v.bound_physical is not None}
        work: list = []
        starved: list[int] = []
        work_done: dict[str, int] = {}
        consumed_by: dict[str, int] = {}
        for cid in sorted(self.virtuals_by_comp):
            scope = _CompartmentScope(self, cid, index)
            done, consumed = self._advance_compartment(cid, scope, bound, busy, work, starved)
            if done:
                work_done[str(cid)] = done
            if consumed:
                consumed_by[str(cid)] = consumed
                self.consumed += consumed
        for v in self.virtuals:
            v.unbind()
        for cid in starved:
            self.starvation_events.append({"phase": index, "compartment": cid})
        self.last_starved = set(starved)

        active = {f.id for f in self.ferries if is_runnable(self.drones[f.id], self.tick)}
        dispatch = dispatch_ferries(self.orders, self.ferries, self.inventory, self.plan.lattice, index,
                                    self.scenario.travel_ticks, active)
        moved = set(dispatch.moved)
        for f in self.ferries:
            self.drones[f.id] = advance_power_state(self.drones[f.id], f.id in moved, self.tick)

        self.e_count += 1
        progress = bool(work_done) or bool(moved)
        self.idle_streak = 0 if progress else self.idle_streak + 1
        recharging = sorted((d.id for d in self.drones.values() if d.recharging), key=natural_key)
        rec = PhaseRecord(index, E_STAR, self.clock_hours, {
            "estar": self.e_count - 1,
            "bindings": [list(p) for p in self.binding.pairs],
            "twins": twins,
            "work": work,
            "work_done": work_done,
            "payload_consumed": consumed_by,
            "starvation": starved,
            "transfers": [t.to_list() for t in dispatch.transfers],
            "recharging": recharging,
        })
        self.records.append(rec)
        if self.idle_streak >= self.scenario.stall_limit and not self.is_complete():
            self.stall = self._stall_diagnostic(index)
        return rec

    def _stall_diagnostic(self, index: int) -> dict[str, Any]:
        starved = [cid for cid in sorted(self.virtuals_by_comp) if self.remaining(cid) > 0]
        granted = {(g.resource_id, g.grantee) for g in self.grants}
        blocking = sorted({r.resource_id for r in self.last_requests
                           if r.compartment_id in starved and (r.resource_id, r.compartment_id) not in granted},
                          key=natural_key)
        no_crew = [cid for cid in starved
                   if not any(self.plan.can_serve(v, self.drones[p])
                              for v in self.virtuals_by_comp[cid] for p in self.crew_by_comp[cid])]
        return {
            "phase": index,
            "idle_estar_phases": self.idle_streak,
            "starved_compartments": starved,
            "blocking_resources": blocking,
            "payload_starved": sorted(c for c in starved if c in self.last_starved or
                                      (self.payload_need[c] > 0 and self.inventory[self.fieldops_of[c]] == 0)),
            "no_capable_drone": no_crew,
        }

    # -- driver --------------------------------------------------------------

    def run(self) -> PhaseTrace:
        self.step_c_phase()
        while not self.is_complete():
            self.step_e_phase()
            if self.is_complete():
                break
            if self.stall is not None:
                log.warning("stalled at phase %d: %s", self.records[-1].index, self.stall)
                break
            self.step_c_phase()
        return self.trace()

    def trace(self) -> PhaseTrace:
        return PhaseTrace(self.records, self.scenario.seed, digest(scenario_to_dict(self.scenario)), {
            "complete": self.is_complete(),
            "stall": self.stall,
            "total_work": sum(c.total_work for c in self.plan.compartments.compartments),
            "remaining_work": self.total_remaining(),
            "estar_phases": self.e_count,
            "cstar_phases": self.c_count,
            "power": {d.id: ("tethered" if d.tethered else "battery") for d in self.plan.drones.values()},
            "work_by_drone": dict(self.work_by_drone),
            "final_inventory": dict(sorted(self.inventory.items(), key=lambda kv: natural_key(kv[0]))),
            "initial_production": self.initial_production,
            "consumed": self.consumed,
            "in_transit": in_transit(self.ferries),
            "starvation_events": list(self.starvation_events),
            "plan_digest": digest(self.plan.to_dict()),
            "goal_trees": self.plan.goal_trees_dict(),
        })


def simulate(scenario: Scenario, *, debug: bool = False) -> PhaseTrace:
    return Simulation(scenario, debug=debug).run()


def run(scenario: Scenario, *, debug: bool = False):
    """Plan and simulate a scenario, returning the aggregated report."""
    from .report import compute_metrics

    trace = simulate(scenario, debug=debug)
    return compute_metrics(trace, scenario)


def write_trace(trace: PhaseTrace, path) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(trace.to_ndjson())


def read_trace(path) -> list[dict[str, Any]]:
    with open(path, encoding="ascii") as fh:
        return [json.loads(line) for line in fh if line.strip()]
