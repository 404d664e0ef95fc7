"""Partitioning a structure into task compartments and coupling them.

Compartments are contiguous runs of segments. Adjacent compartments share a
boundary interface; compartments served by the same staging site share that
site. Both are modelled as named abstract resources.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence, Union

from ._util import natural_key
from .structure import LandscapeStructure, Site, SiteKind

DEFAULT_TASK_KIND = "StructureAssembly"


class PlanningError(ValueError):
    """Raised when a valid scenario cannot be turned into a plan."""


@dataclass(frozen=True)
class FixedCount:
    k: int


@dataclass(frozen=True)
class UniformLength:
    target_ft: float


@dataclass(frozen=True)
class UniformWork:
    k: int


CompartmentPolicy = Union[FixedCount, UniformLength, UniformWork]


@dataclass(frozen=True)
class Compartment:
    id: int
    first_segment: int
    last_segment: int
    total_work: int
    start_ft: float
    end_ft: float
    work_by_kind: Mapping[str, int] = field(default_factory=dict)
    payload_demand: int = 0
    staging_site: str | None = None
    fieldops_site: str | None = None

    @property
    def segment_ids(self) -> range:
        return range(self.first_segment, self.last_segment + 1)

    @property
    def midpoint_ft(self) -> float:
        return (self.start_ft + self.end_ft) / 2

    @property
    def task_kind(self) -> str:
        """Kind with the most work; ties go to the alphabetically first name."""
        if not self.work_by_kind or self.total_work == 0:
            return DEFAULT_TASK_KIND
        return min(self.work_by_kind.items(), key=lambda kv: (-kv[1], kv[0]))[0]


@dataclass(frozen=True)
class CompartmentPlan:
    compartments: tuple[Compartment, ...]
    policy: CompartmentPolicy

    def __post_init__(self):
        if not self.compartments:
            raise PlanningError("a plan needs at least one compartment")

    def by_id(self, cid: int) -> Compartment:
        return self.compartments[cid]

    def compartment_of_segment(self, segment_id: int) -> Compartment:
        for c in self.compartments:
            if c.first_segment <= segment_id <= c.last_segment:
                return c
        raise KeyError(segment_id)


@dataclass(frozen=True)
class IntersectionRelation:
    members: tuple[int, ...]
    shared_resources: tuple[str, ...]

    def __post_init__(self):
        if len(self.members) < 2 or len(set(self.members)) != len(self.members):
            raise ValueError(f"relation needs >= 2 distinct members, got {self.members}")


def boundary_resource(left: int, right: int) -> str:
    return f"boundary:{left}|{right}"


def staging_resource(site_id: str) -> str:
    return f"staging:{site_id}"


def _group_sizes_fixed(n: int, k: int) -> list[int]:
    base, extra = divmod(n, k)
    return [base + (1 if i < extra else 0) for i in range(k)]


def _group_sizes_length(lengths: Sequence[float], target: float) -> list[int]:
    sizes, acc, count = [], 0.0, 0
    for length in lengths:
        acc += length
        count += 1
        if acc >= target:
            sizes.append(count)
            acc, count = 0.0, 0
    if count:
        sizes.append(count)
    return sizes


def _group_sizes_work(works: Sequence[int], k: int) -> list[int]:
    # greedy prefix: close a compartment once its work reaches
    # remaining_work / remaining_compartments (inclusive of the closing segment)
    n = len(works)
    sizes = []
    i = 0
    remaining = sum(works)
    for formed in range(k - 1):
        slots_left = k - formed
        acc, count = 0, 0
        while i < n:
            acc += works[i]
            count += 1
            i += 1
            must_leave = slots_left - 1
            if acc * slots_left >= remaining or n - i == must_leave:
                break
        sizes.append(count)
        remaining -= acc
    sizes.append(n - i)
    return sizes


def compartmentalize(structure: LandscapeStructure, policy: CompartmentPolicy) -> CompartmentPlan:
    """Split the segment chain into contiguous, order-preserving compartments."""
    segs = structure.segments
    n = len(segs)
    if n == 0:
        raise PlanningError("structure has no segments")
    if isinstance(policy, (FixedCount, UniformWork)):
        if policy.k < 1:
            raise PlanningError(f"compartment count K must be >= 1, got {policy.k}")
        if policy.k > n:
            raise PlanningError(f"compartment count K={policy.k} exceeds segment count {n}")
    if isinstance(policy, FixedCount):
        sizes = _group_sizes_fixed(n, policy.k)
    elif isinstance(policy, UniformWork):
        sizes = _group_sizes_work([s.total_work for s in segs], policy.k)
    elif isinstance(policy, UniformLength):
        if not policy.target_ft > 0:
            raise PlanningError(f"target_ft must be > 0, got {policy.target_ft}")
        sizes = _group_sizes_length([s.length_ft for s in segs], policy.target_ft)
    else:
        raise PlanningError(f"unknown compartment policy {policy!r}")

    compartments = []
    start = 0
    for cid, size in enumerate(sizes):
        group = segs[start:start + size]
        kinds: Counter = Counter()
        for s in group:
            kinds.update(s.work_required)
        compartments.append(Compartment(
            id=cid,
            first_segment=group[0].id,
            last_segment=group[-1].id,
            total_work=sum(s.total_work for s in group),
            start_ft=group[0].start_ft,
            end_ft=group[-1].end_ft,
            work_by_kind=dict(sorted(kinds.items())),
            payload_demand=sum(s.payload_required for s in group),
        ))
        start += size
    return CompartmentPlan(tuple(compartments), policy)


def _distance(a: float | None, b: float | None) -> float:
    if a is None or b is None:
        return 0.0
    return abs(a - b)


def nearest_site(position: float | None, candidates: Iterable[Site]) -> Site:
    return min(candidates, key=lambda s: (_distance(position, s.position_ft), natural_key(s.id)))


def assign_sites(plan: CompartmentPlan, sites: Sequence[Site]) -> tuple[CompartmentPlan, tuple[Site, ...]]:
    """Attach a staging and a FieldOps site to every compartment.

    Staging sites are matched by nearest position. When no FieldOps sites are
    given, one per compartment is derived at the compartment midpoint. Given
    FieldOps sites are matched by nearest position and must not be shared.
    """
    staging = [s for s in sites if s.kind is SiteKind.FIELD_STAGING_AREA]
    if not staging:
        raise PlanningError("sites: at least one FieldStagingArea is required")
    fieldops = [s for s in sites if s.kind is SiteKind.FIELD_OPS]
    out_sites = list(sites)
    derive = not fieldops
    taken: dict[str, int] = {}
    compartments = []
    for c in plan.compartments:
        st = nearest_site(c.midpoint_ft, staging)
        if derive:
            fo = Site(id=f"FO{c.id}", kind=SiteKind.FIELD_OPS, inventory=0, position_ft=c.midpoint_ft)
            out_sites.append(fo)
        else:
            fo = nearest_site(c.midpoint_ft, fieldops)
            if fo.id in taken:
                raise PlanningError(
                    f"FieldOps site {fo.id!r} is nearest to compartments {taken[fo.id]} and {c.id}; "
                    "list one FieldOps site per compartment or omit them")
            taken[fo.id] = c.id
        compartments.append(replace(c, staging_site=st.id, fieldops_site=fo.id))
    return replace(plan, compartments=tuple(compartments)), tuple(out_sites)


def derive_intersections(plan: CompartmentPlan, sites: Sequence[Site] | None = None) -> list[IntersectionRelation]:
    """Couple compartments through boundaries and shared staging sites.

    Every adjacent pair gets a boundary resource. Compartments sharing a
    staging site form one relation holding the site plus every boundary
    between two of its members; remaining boundaries stay pairwise.
    """
    del sites  # staging assignment is read from the plan
    comps = plan.compartments
    by_staging: dict[str, list[int]] = defaultdict(list)
    for c in comps:
        if c.staging_site is not None:
            by_staging[c.staging_site].append(c.id)
    group_of: dict[int, str] = {}
    relations: list[IntersectionRelation] = []
    for site_id, members in by_staging.items():
        if len(members) < 2:
            continue
        for m in members:
            group_of[m] = site_id
        member_set = set(members)
        resources = [staging_resource(site_id)]
        resources += [boundary_resource(m, m + 1) for m in sorted(members) if m + 1 in member_set]
        relations.append(IntersectionRelation(tuple(sorted(members)),
                                              tuple(sorted(resources, key=natural_key))))
    for left, right in zip(comps, comps[1:]):
        g = group_of.get(left.id)
        if g is not None and group_of.get(right.id) == g:
            continue
        relations.append(IntersectionRelation((left.id, right.id),
                                              (boundary_resource(left.id, right.id),)))
    relations.sort(key=lambda r: r.members)
    return relations


def resources_of(relations: Sequence[IntersectionRelation]) -> dict[int, tuple[str, ...]]:
    """Shared resources touching each compartment."""
    out: dict[int, list[str]] = defaultdict(list)
    for rel in relations:
        for m in rel.members:
            out[m].extend(rel.shared_resources)
    return {cid: tuple(sorted(set(rs), key=natural_key)) for cid, rs in out.items()}


def relation_keys(relations: Sequence[IntersectionRelation]) -> dict[str, IntersectionRelation]:
    return {f"I{i}": rel for i, rel in enumerate(relations)}
