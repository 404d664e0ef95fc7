"""Ility-driven goal trees, subgroup apportionment and the virtual fleet."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from fractions import Fraction
from typing import Any, Iterable, Mapping, Sequence

from ._util import natural_key
from .compartments import Compartment, CompartmentPlan, PlanningError
from .fleet import Capability, DroneRole, PhysicalDrone, VirtualDrone


class Ility(str, Enum):
    FUNCTIONALITY = "Functionality"
    PRODUCTIVITY = "Productivity"
    PERFORMANCE = "Performance"
    COST = "Cost"
    RELIABILITY = "Reliability"
    SURVIVABILITY = "Survivability"
    SECURITY = "Security"
    EFFICIENCY = "Efficiency"
    MAINTAINABILITY = "Maintainability"
    ADAPTABILITY = "Adaptability"


CORE_ILITIES = (Ility.FUNCTIONALITY, Ility.PRODUCTIVITY, Ility.PERFORMANCE, Ility.COST)


class Level(IntEnum):
    GOAL = 0
    AGENDA = 1
    TASK = 2
    BEHAVIOR = 3
    OPERATION = 4
    ACTION = 5


DEFAULT_FANOUT = (1, 1, 1, 1, 1)


@dataclass
class GoalNode:
    id: str
    level: Level
    ility: Ility
    compartment_id: int
    work_share: int = 0
    children: list[GoalNode] = field(default_factory=list)

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def leaves(self) -> list[GoalNode]:
        if self.is_leaf:
            return [self]
        out = []
        for child in self.children:
            out.extend(child.leaves())
        return out

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"id": self.id, "level": self.level.name.title(), "ility": self.ility.value}
        if self.is_leaf:
            d["work_share"] = self.work_share
        else:
            d["children"] = [c.to_dict() for c in self.children]
        return d


GoalTree = GoalNode


def split_evenly(total: int, parts: int) -> list[int]:
    """Equal split with the remainder going to the first (lowest-id) parts."""
    base, extra = divmod(total, parts)
    return [base + (1 if i < extra else 0) for i in range(parts)]


def build_goal_trees(compartment: Compartment, ilities: Iterable[Ility],
                     fanout_template: Sequence[int] = DEFAULT_FANOUT) -> list[GoalTree]:
    """Build one six-level tree per ility for a compartment.

    ``fanout_template`` gives the branching count for each of the five level
    transitions. Leaves share the compartment's work evenly.
    """
    ilities = list(ilities)
    if not ilities:
        raise PlanningError("ility set must not be empty")
    if len(set(ilities)) != len(ilities):
        raise PlanningError("ility names must be unique")
    fanout = list(fanout_template)
    if len(fanout) != len(Level) - 1 or any(f < 1 for f in fanout):
        raise PlanningError(f"fanout template needs 5 entries >= 1, got {fanout}")

    trees = []
    for ility in ilities:
        counter = 0

        def make(level: Level) -> GoalNode:
            nonlocal counter
            node = GoalNode(f"c{compartment.id}.{ility.value}.{counter}", level, ility, compartment.id)
            counter += 1
            if level < Level.ACTION:
                node.children = [make(Level(level + 1)) for _ in range(fanout[level])]
            return node

        root = make(Level.GOAL)
        leaves = root.leaves()
        for leaf, share in zip(leaves, split_evenly(compartment.total_work, len(leaves))):
            leaf.work_share = share
        trees.append(root)
    return trees


def work_tree(trees: Sequence[GoalTree]) -> GoalTree:
    """The tree whose leaves consume drone time (Functionality when present)."""
    for t in trees:
        if t.ility is Ility.FUNCTIONALITY:
            return t
    return trees[0]


def apportion(weights: Sequence[int], seats: int) -> list[int]:
    """Largest-remainder apportionment with a floor of one seat per weight.

    One seat is reserved for every entry, the rest are split in proportion
    to the weights; ties on the remainder go to the lower index.
    """
    n = len(weights)
    if n == 0:
        return []
    if seats < n:
        raise PlanningError(f"need at least {n} seats, got {seats}")
    spare = seats - n
    total = sum(weights)
    if spare == 0 or total == 0:
        base = [1] * n
        for i in range(spare):
            base[i % n] += 1
        return base
    quotas = [Fraction(spare * w, total) for w in weights]
    alloc = [int(q) for q in quotas]
    left = spare - sum(alloc)
    order = sorted(range(n), key=lambda i: (-(quotas[i] - alloc[i]), i))
    for i in order[:left]:
        alloc[i] += 1
    return [a + 1 for a in alloc]


def _leaf_sort(leaves: Iterable[GoalNode]) -> list[GoalNode]:
    return sorted(leaves, key=lambda n: natural_key(n.id))


def assign_subgroups(trees: Sequence[GoalTree], virtual_fleet: Sequence[VirtualDrone | str]) -> dict[str, tuple[str, ...]]:
    """Map every positive-work leaf to a block of virtual drone ids.

    Virtual ids are sorted first, so the result does not depend on the input
    order of the fleet.
    """
    leaves = _leaf_sort(l for t in trees for l in t.leaves() if l.work_share > 0)
    ids = sorted((v if isinstance(v, str) else v.id for v in virtual_fleet), key=natural_key)
    if len(ids) < len(leaves):
        raise PlanningError(f"{len(leaves)} leaves with work but only {len(ids)} virtual drones")
    sizes = apportion([l.work_share for l in leaves], len(ids))
    out: dict[str, tuple[str, ...]] = {}
    pos = 0
    for leaf, size in zip(leaves, sizes):
        out[leaf.id] = tuple(ids[pos:pos + size])
        pos += size
    return out


def expand_virtual_fleet(plan: CompartmentPlan, trees: Mapping[int, Sequence[GoalTree]],
                         physical: Sequence[PhysicalDrone], *,
                         drone_compartments: Mapping[str, int] | None = None,
                         required_resources: Mapping[int, frozenset[str]] | None = None) -> list[VirtualDrone]:
    """Create the virtual drones that staff each compartment's work tree.

    A compartment gets one virtual drone per positive leaf, or one per field
    drone confined to it when that is larger. Virtual drones may outnumber
    physical ones; they start unbound.
    """
    if not any(p.role is DroneRole.FIELD_OPERATION for p in physical):
        raise PlanningError("fleet has no FieldOperation drone to carry out work")
    per_comp = Counter(drone_compartments.values()) if drone_compartments else Counter()
    required_resources = required_resources or {}
    out: list[VirtualDrone] = []
    for comp in plan.compartments:
        tree = work_tree(trees[comp.id])
        positive = [l for l in tree.leaves() if l.work_share > 0]
        if not positive:
            continue
        slots = max(len(positive), per_comp.get(comp.id, 0))
        ids = [f"v{len(out) + i}" for i in range(slots)]
        groups = assign_subgroups([tree], ids)
        shares = {l.id: l.work_share for l in positive}
        for leaf_id, members in groups.items():
            for vid, work in zip(members, split_evenly(shares[leaf_id], len(members))):
                out.append(VirtualDrone(
                    id=vid,
                    leaf_goal_id=leaf_id,
                    compartment_id=comp.id,
                    required_capability=Capability(comp.task_kind),
                    remaining_work=work,
                    goal_level=int(Level.ACTION),
                    required_resources=frozenset(required_resources.get(comp.id, ())),
                ))
    return out
