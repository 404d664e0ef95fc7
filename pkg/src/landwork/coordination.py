"""C* machinery: broker arbitration, rotating leader election and the stigmergy board."""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass
from enum import Enum
from numbers import Number
from typing import Any, Iterable, Sequence, Union

from ._util import natural_key
from .compartments import IntersectionRelation

BROKER = "broker"
DEFAULT_TTL = 2


class CoordinationError(ValueError):
    pass


class CStrategy(str, Enum):
    BROKER = "Broker"
    LEADER_ELECTION = "LeaderElection"


@dataclass(frozen=True)
class ResourceRequest:
    compartment_id: int
    resource_id: str
    remaining_work: int
    phase_index: int = 0


@dataclass(frozen=True)
class Grant:
    resource_id: str
    grantee: int
    phase_index: int


@dataclass(frozen=True)
class WorkOrder:
    issuer: Union[int, str]  # leader compartment id or BROKER
    target: int
    directive: str  # "grant" or "wait"
    resource_id: str
    phase_index: int


def elect_leader(relation: IntersectionRelation | Sequence[int], phase_index: int) -> int:
    """Rotate leadership through the sorted members, one step per C* phase."""
    members = sorted(relation.members if isinstance(relation, IntersectionRelation) else relation)
    if not members:
        raise CoordinationError("cannot elect a leader from an empty relation")
    return members[phase_index % len(members)]


def _by_resource(requests: Iterable[ResourceRequest]) -> dict[str, dict[int, ResourceRequest]]:
    grouped: dict[str, dict[int, ResourceRequest]] = defaultdict(dict)
    for r in requests:
        prev = grouped[r.resource_id].get(r.compartment_id)
        if prev is None or r.remaining_work > prev.remaining_work:
            grouped[r.resource_id][r.compartment_id] = r
    return grouped


def _arbitrate(resource: str, reqs: Sequence[ResourceRequest], winner: int, issuer: Union[int, str],
               phase: int) -> tuple[Grant, list[WorkOrder]]:
    orders = [WorkOrder(issuer, winner, "grant", resource, phase)]
    orders += [WorkOrder(issuer, r.compartment_id, "wait", resource, phase)
               for r in sorted(reqs, key=lambda r: r.compartment_id) if r.compartment_id != winner]
    return Grant(resource, winner, phase), orders


def _max_work_winner(reqs: Iterable[ResourceRequest]) -> int:
    return min(reqs, key=lambda r: (-r.remaining_work, r.compartment_id)).compartment_id


def broker_resolve(requests: Sequence[ResourceRequest]) -> tuple[list[Grant], list[WorkOrder]]:
    """Grant each resource to the requester with the most remaining work.

    Ties go to the lowest compartment id. Losers receive wait orders.
    """
    grants, orders = [], []
    for resource, reqs in sorted(_by_resource(requests).items(), key=lambda kv: natural_key(kv[0])):
        rs = list(reqs.values())
        phase = rs[0].phase_index
        g, o = _arbitrate(resource, rs, _max_work_winner(rs), BROKER, phase)
        grants.append(g)
        orders.extend(o)
    return grants, orders


def leader_resolve(relations: Sequence[IntersectionRelation], requests: Sequence[ResourceRequest],
                   phase_index: int) -> tuple[list[Grant], list[WorkOrder]]:
    """Resolve contention inside each relation through its elected leader.

    The leader's own requests win; other resources of the relation go to the
    follower with the most remaining work.
    """
    owner: dict[str, IntersectionRelation] = {}
    for rel in relations:
        for res in rel.shared_resources:
            owner[res] = rel
    grants, orders = [], []
    for resource, reqs in sorted(_by_resource(requests).items(), key=lambda kv: natural_key(kv[0])):
        rel = owner.get(resource)
        if rel is None:
            raise CoordinationError(f"request references unknown resource {resource!r}")
        leader = elect_leader(rel, phase_index)
        rs = list(reqs.values())
        winner = leader if leader in reqs else _max_work_winner(rs)
        g, o = _arbitrate(resource, rs, winner, leader, phase_index)
        grants.append(g)
        orders.extend(o)
    return grants, orders


@dataclass(frozen=True)
class BoardEntry:
    value: Any
    posted_phase: int
    ttl_phases: int

    def readable_at(self, phase: int) -> bool:
        return self.posted_phase <= phase < self.posted_phase + self.ttl_phases


class StigmergyBoard:
    """Blackboard of decaying entries.

    Keys of the form ``"<intersection>/<name>"`` are grouped under their
    prefix when the board is reduced into a digest.
    """

    def __init__(self) -> None:
        self.entries: dict[str, BoardEntry] = {}

    def post(self, key: str, value: Any, phase: int, ttl: int = DEFAULT_TTL) -> None:
        self.entries[key] = BoardEntry(value, phase, ttl)

    def purge(self, phase: int) -> list[str]:
        expired = [k for k, e in self.entries.items() if phase >= e.posted_phase + e.ttl_phases]
        for k in expired:
            del self.entries[k]
        return expired

    def read(self, key: str, phase: int) -> Any:
        entry = self.entries.get(key)
        if entry is None or not entry.readable_at(phase):
            return None
        return entry.value

    def readable(self, phase: int) -> dict[str, Any]:
        return {k: e.value for k, e in self.entries.items() if e.readable_at(phase)}

    def snapshot(self) -> dict[str, BoardEntry]:
        return dict(self.entries)


def intersection_key(key: str) -> str:
    return key.split("/", 1)[0]


def reduce_values(values: Sequence[Any]) -> Any:
    if all(isinstance(v, Number) and not isinstance(v, bool) for v in values):
        return sum(values)
    counts = Counter(str(v) for v in values)
    return dict(sorted(counts.items()))


def post_and_aggregate(board: StigmergyBoard, messages: Sequence[tuple[str, Any]], phase_index: int,
                       ttl: int = DEFAULT_TTL) -> tuple[StigmergyBoard, dict[str, Any]]:
    """Purge expired entries, post messages, and map-reduce readable entries by intersection.

    Numeric groups reduce by sum, anything else by multiset union (a count per value).
    """
    board.purge(phase_index)
    for key, value in messages:
        board.post(key, value, phase_index, ttl)
    groups: dict[str, list[Any]] = defaultdict(list)
    for key, value in sorted(board.readable(phase_index).items(), key=lambda kv: natural_key(kv[0])):
        groups[intersection_key(key)].append(value)
    digest = {k: reduce_values(vs) for k, vs in sorted(groups.items(), key=lambda kv: natural_key(kv[0]))}
    return board, digest
