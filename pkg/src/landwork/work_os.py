"""Work OS: multiplexes runnable virtual drones onto available physical drones."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Sequence

from ._util import natural_key
from .fleet import PhysicalDrone, VirtualDrone, capability_match, is_runnable

Compatible = Callable[[VirtualDrone, PhysicalDrone], bool]


class MultiplexScheme(str, Enum):
    ROUND_ROBIN = "RoundRobin"
    WEIGHTED_BY_REMAINING_WORK = "WeightedByRemainingWork"
    PRIORITY_BY_GOAL_DEPTH = "PriorityByGoalDepth"


@dataclass(frozen=True)
class Binding:
    phase_index: int
    pairs: tuple[tuple[str, str], ...]  # (physical id, virtual id)

    @property
    def physicals(self) -> set[str]:
        return {p for p, _ in self.pairs}

    @property
    def virtuals(self) -> set[str]:
        return {v for _, v in self.pairs}


def compute_runnable(virtuals: Sequence[VirtualDrone], grants: Iterable, physicals: Sequence[PhysicalDrone] = (),
                     tick_hours: float = 0.0, compatible: Compatible = capability_match) -> list[VirtualDrone]:
    """Virtual drones that can make progress in the coming E* phase.

    A virtual drone qualifies when it has work left, its compartment holds a
    grant for every resource it needs, and at least one compatible physical
    drone is not recharging or out of battery.
    """
    held = {(g.resource_id, g.grantee) for g in grants}
    ready = [p for p in physicals if is_runnable(p, tick_hours)]
    out = []
    for v in virtuals:
        if v.remaining_work <= 0:
            continue
        if any((r, v.compartment_id) not in held for r in v.required_resources):
            continue
        if not any(compatible(v, p) for p in ready):
            continue
        out.append(v)
    return out


def _scheme_order(phase_index: int, runnable: list[VirtualDrone], n_available: int,
                  scheme: MultiplexScheme) -> list[VirtualDrone]:
    if scheme is MultiplexScheme.ROUND_ROBIN:
        # advance by the number of physicals so every window of ceil(V/P)
        # phases covers all V virtuals
        offset = (phase_index * max(n_available, 1)) % len(runnable)
        return runnable[offset:] + runnable[:offset]
    if scheme is MultiplexScheme.WEIGHTED_BY_REMAINING_WORK:
        return sorted(runnable, key=lambda v: (-v.remaining_work, natural_key(v.id)))
    if scheme is MultiplexScheme.PRIORITY_BY_GOAL_DEPTH:
        return sorted(runnable, key=lambda v: (v.goal_level, natural_key(v.id)))
    raise ValueError(f"unknown multiplex scheme {scheme!r}")


def bind_phase(phase_index: int, runnable: Sequence[VirtualDrone], available: Sequence[PhysicalDrone],
               scheme: MultiplexScheme, compatible: Compatible = capability_match) -> Binding:
    """Greedy maximal matching of virtuals to physicals in the scheme's order.

    Each virtual, in scheme order, takes the lowest-id compatible physical
    that is still free.
    """
    vs = sorted({v.id: v for v in runnable}.values(), key=lambda v: natural_key(v.id))
    ps = sorted({p.id: p for p in available}.values(), key=lambda p: natural_key(p.id))
    if not vs or not ps:
        return Binding(phase_index, ())
    free = list(ps)
    pairs = []
    for v in _scheme_order(phase_index, vs, len(ps), scheme):
        for i, p in enumerate(free):
            if compatible(v, p):
                pairs.append((p.id, v.id))
                del free[i]
                break
        if not free:
            break
    pairs.sort(key=lambda pv: natural_key(pv[0]))
    return Binding(phase_index, tuple(pairs))
