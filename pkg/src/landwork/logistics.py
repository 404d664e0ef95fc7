"""Payload flow through the HQ -> supply -> staging -> FieldOps lattice.

Ferries carry payload one leg at a time. Empty return trips use the reverse
edges. All quantities are integers, so conservation checks are exact.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, MutableMapping, Sequence

from ._util import natural_key
from .compartments import CompartmentPlan, PlanningError, nearest_site
from .structure import Site, SiteKind

DEFAULT_FERRY_CAPACITY = 10
DEFAULT_TRAVEL_TICKS = 1


@dataclass
class WorkflowLattice:
    rank: dict[str, int]
    parent: dict[str, str]  # node -> its rank-(r-1) node
    positions: dict[str, float | None] = field(default_factory=dict)

    @property
    def forward_edges(self) -> list[tuple[str, str]]:
        return sorted(((p, c) for c, p in self.parent.items()), key=lambda e: (self.rank[e[0]], natural_key(e[0]), natural_key(e[1])))

    @property
    def reverse_edges(self) -> list[tuple[str, str]]:
        return [(c, p) for p, c in self.forward_edges]

    @property
    def hq(self) -> str:
        return next(s for s, r in self.rank.items() if r == 0)

    def neighbors(self, node: str) -> list[str]:
        out = [self.parent[node]] if node in self.parent else []
        out += [c for c, p in self.parent.items() if p == node]
        return sorted(out, key=natural_key)

    def chain_to(self, node: str) -> list[str]:
        """Forward path from HQ to ``node``."""
        path = [node]
        while path[-1] in self.parent:
            path.append(self.parent[path[-1]])
        return path[::-1]

    def path(self, a: str, b: str) -> list[str]:
        """Shortest path over forward and reverse edges, deterministic on ties."""
        if a == b:
            return [a]
        prev = {a: None}
        queue = deque([a])
        while queue:
            node = queue.popleft()
            for nxt in self.neighbors(node):
                if nxt not in prev:
                    prev[nxt] = node
                    if nxt == b:
                        out = [b]
                        while prev[out[-1]] is not None:
                            out.append(prev[out[-1]])
                        return out[::-1]
                    queue.append(nxt)
        raise PlanningError(f"no lattice path from {a!r} to {b!r}")

    def reachable_from_hq(self) -> set[str]:
        seen = {self.hq}
        stack = [self.hq]
        while stack:
            node = stack.pop()
            for c, p in self.parent.items():
                if p == node and c not in seen:
                    seen.add(c)
                    stack.append(c)
        return seen


def build_lattice(sites: Sequence[Site]) -> WorkflowLattice:
    """Link each rank-(r+1) site to its nearest rank-r site."""
    by_rank: dict[int, list[Site]] = {r: [] for r in range(4)}
    for s in sites:
        by_rank[s.kind.rank].append(s)
    if len(by_rank[0]) != 1:
        raise PlanningError(f"lattice needs exactly one CentralHQ, found {len(by_rank[0])}")
    for kind in (SiteKind.SUPPLY_STATION, SiteKind.FIELD_STAGING_AREA):
        if not by_rank[kind.rank]:
            raise PlanningError(f"lattice needs at least one {kind.value} site")
    rank = {s.id: s.kind.rank for s in sites}
    parent: dict[str, str] = {}
    for r in (1, 2, 3):
        for s in sorted(by_rank[r], key=lambda s: natural_key(s.id)):
            if by_rank[r - 1]:
                parent[s.id] = nearest_site(s.position_ft, by_rank[r - 1]).id
    lattice = WorkflowLattice(rank, parent, {s.id: s.position_ft for s in sites})
    unreachable = [s.id for s in by_rank[3] if s.id not in lattice.reachable_from_hq()]
    if unreachable:
        raise PlanningError(f"FieldOps sites unreachable from CentralHQ: {unreachable}")
    return lattice


class OrderState(str, Enum):
    PENDING = "Pending"
    IN_TRANSIT = "InTransit"
    DELIVERED = "Delivered"


@dataclass
class LogisticsOrder:
    id: int
    origin: str
    destination: str
    quantity: int
    compartment_id: int | None = None
    shipped: int = 0
    delivered: int = 0

    def __post_init__(self):
        if self.quantity <= 0:
            raise ValueError("order quantity must be > 0")

    @property
    def state(self) -> OrderState:
        if self.delivered >= self.quantity:
            return OrderState.DELIVERED
        return OrderState.PENDING if self.shipped == 0 else OrderState.IN_TRANSIT

    @property
    def unshipped(self) -> int:
        return self.quantity - self.shipped


def create_orders(plan: CompartmentPlan, lattice: WorkflowLattice,
                  demand: Mapping[int, int] | None = None) -> list[LogisticsOrder]:
    """One single-leg order per forward leg from HQ to each compartment's FieldOps site."""
    orders: list[LogisticsOrder] = []
    for comp in plan.compartments:
        qty = comp.payload_demand if demand is None else demand.get(comp.id, 0)
        if qty <= 0:
            continue
        chain = lattice.chain_to(comp.fieldops_site)
        for a, b in zip(chain, chain[1:]):
            orders.append(LogisticsOrder(len(orders), a, b, qty, comp.id))
    return orders


@dataclass
class Ferry:
    id: str
    location: str
    capacity: int = DEFAULT_FERRY_CAPACITY
    cargo: int = 0
    order_id: int | None = None  # order being served (loaded or claimed)
    claim: int = 0
    next_hop: str | None = None
    leg_ticks_left: int = 0

    @property
    def idle(self) -> bool:
        return self.order_id is None and self.next_hop is None


@dataclass(frozen=True)
class Transfer:
    ferry: str
    order: int
    origin: str
    destination: str
    quantity: int
    kind: str  # "load", "leg" or "deliver"

    def to_list(self) -> list:
        return [self.kind, self.ferry, self.order, self.origin, self.destination, self.quantity]


@dataclass
class DispatchResult:
    transfers: list[Transfer] = field(default_factory=list)
    moved: list[str] = field(default_factory=list)  # ferries that acted this tick
    starvation_risk: list[int] = field(default_factory=list)  # order ids


def _travel(travel: Mapping[tuple[str, str], int], a: str, b: str) -> int:
    return max(1, travel.get((a, b), travel.get((b, a), DEFAULT_TRAVEL_TICKS)))


def dispatch_ferries(orders: Sequence[LogisticsOrder], ferries: Sequence[Ferry],
                     inventory: MutableMapping[str, int], lattice: WorkflowLattice, phase: int = 0,
                     travel: Mapping[tuple[str, str], int] | None = None,
                     active: set[str] | None = None) -> DispatchResult:
    """Advance every ferry by one tick, FIFO over orders by id.

    Loading debits the origin and delivery credits the destination in the
    same step that moves the payload, so inventory plus cargo is conserved
    after every ferry step. ``active`` limits which ferries may act (power).
    """
    del phase
    travel = travel or {}
    result = DispatchResult()
    by_id = {o.id: o for o in orders}
    fifo = sorted(orders, key=lambda o: o.id)

    def claims(exclude: Ferry) -> tuple[dict[int, int], dict[str, int]]:
        per_order: dict[int, int] = {}
        per_site: dict[str, int] = {}
        for f in ferries:
            if f is not exclude and f.claim:
                per_order[f.order_id] = per_order.get(f.order_id, 0) + f.claim
                origin = by_id[f.order_id].origin
                per_site[origin] = per_site.get(origin, 0) + f.claim
        return per_order, per_site

    def pick(f: Ferry) -> LogisticsOrder | None:
        per_order, per_site = claims(f)
        for o in fifo:
            free = o.unshipped - per_order.get(o.id, 0)
            stock = inventory.get(o.origin, 0) - per_site.get(o.origin, 0)
            if free > 0 and stock > 0:
                f.order_id = o.id
                f.claim = min(f.capacity, free, stock)
                return o
        return None

    def start_leg(f: Ferry, toward: str) -> None:
        f.next_hop = lattice.path(f.location, toward)[1]
        f.leg_ticks_left = _travel(travel, f.location, f.next_hop)

    for f in sorted(ferries, key=lambda f: natural_key(f.id)):
        if active is not None and f.id not in active:
            continue
        if f.next_hop is None:
            if f.cargo:
                start_leg(f, by_id[f.order_id].destination)
            else:
                order = by_id.get(f.order_id) if f.order_id is not None else None
                if order is None or order.unshipped <= 0:
                    f.order_id, f.claim = None, 0
                    order = pick(f)
                if order is None:
                    continue
                if f.location == order.origin:
                    qty = min(f.capacity, order.unshipped, inventory.get(order.origin, 0))
                    f.claim = 0
                    if qty <= 0:
                        f.order_id = None
                        continue
                    inventory[order.origin] -= qty
                    order.shipped += qty
                    f.cargo = qty
                    result.transfers.append(Transfer(f.id, order.id, order.origin, order.origin, qty, "load"))
                    start_leg(f, order.destination)
                else:
                    start_leg(f, order.origin)
        result.moved.append(f.id)
        f.leg_ticks_left -= 1
        if f.leg_ticks_left > 0:
            continue
        src, f.location, f.next_hop = f.location, f.next_hop, None
        if f.cargo:
            order = by_id[f.order_id]
            result.transfers.append(Transfer(f.id, order.id, src, f.location, f.cargo, "leg"))
            if f.location == order.destination:
                inventory[f.location] = inventory.get(f.location, 0) + f.cargo
                order.delivered += f.cargo
                result.transfers.append(Transfer(f.id, order.id, src, f.location, f.cargo, "deliver"))
                f.cargo = 0
                f.order_id = None

    loaded = {f.order_id for f in ferries if f.cargo}
    for o in fifo:
        if o.unshipped > 0 and inventory.get(o.origin, 0) == 0 and o.id not in loaded:
            result.starvation_risk.append(o.id)
    return result


def in_transit(ferries: Sequence[Ferry]) -> int:
    return sum(f.cargo for f in ferries)
