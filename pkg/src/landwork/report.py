"""Run metrics for the four core ilities, the deployment-time budget, and report output."""

from __future__ import annotations

import csv
import io
import json
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, TextIO

from ._util import natural_key
from .engine import PhaseTrace
from .scenario import Scenario

DEFAULT_BUDGET_HOURS = 10.0


@dataclass(frozen=True)
class BudgetVerdict:
    passed: bool
    makespan_hours: float
    budget_max_hours: float
    margin_hours: float


@dataclass
class DroneMetrics:
    id: str
    role: str
    power: str
    completed_work: int
    bound_phases: int
    active_phases: int
    utilization: float
    productivity: float
    drone_hours: float
    cost: float


@dataclass
class SimReport:
    functionality_complete: bool
    makespan_hours: float
    estar_phase_count: int
    cstar_phase_count: int
    total_work: int
    completed_work: int
    fleet_size: int
    fleet_productivity: float
    cost_total: float
    budget: BudgetVerdict
    ilities: dict[str, Any]
    drones: list[DroneMetrics]
    starvation_events: list[dict[str, int]]
    stall: dict[str, Any] | None
    final_inventory: dict[str, int]
    payload: dict[str, int]
    seed: int
    scenario_digest: str
    plan_digest: str
    trace_digest: str
    goal_trees: dict[str, Any] = field(default_factory=dict)
    trace: PhaseTrace | None = field(default=None, repr=False, compare=False)

    @property
    def stalled(self) -> bool:
        return self.stall is not None

    def to_dict(self) -> dict[str, Any]:
        d = asdict(replace(self, trace=None))
        del d["trace"]
        return d


def check_time_budget(report: SimReport | float, budget_max_hours: float = DEFAULT_BUDGET_HOURS) -> BudgetVerdict:
    """Pass iff the makespan is at most the budget (inclusive)."""
    makespan = report.makespan_hours if isinstance(report, SimReport) else float(report)
    margin = round(budget_max_hours - makespan, 9)
    return BudgetVerdict(makespan <= budget_max_hours, makespan, budget_max_hours, margin)


def compute_metrics(trace: PhaseTrace, scenario: Scenario) -> SimReport:
    """Aggregate a completed or stalled trace into a report.

    Every physical drone counts as deployed for the whole makespan, so fleet
    productivity is completed work over fleet size times makespan.
    """
    tick = scenario.tick_hours
    e_records = [r for r in trace.records if r.kind == "E"]
    n_e = len(e_records)
    n_c = len(trace.records) - n_e
    makespan = round((n_e + n_c * scenario.c_phase_overhead_ticks) * tick, 9)

    bound: dict[str, int] = {}
    active: dict[str, int] = {}
    done: dict[str, int] = {}
    for rec in e_records:
        for p, _v in rec.data["bindings"]:
            bound[p] = bound.get(p, 0) + 1
            active[p] = active.get(p, 0) + 1
        for p, _v, units in rec.data["work"]:
            done[p] = done.get(p, 0) + units
        for ferry in {t[1] for t in rec.data["transfers"]}:
            if ferry not in bound:
                active[ferry] = active.get(ferry, 0) + 1

    power = trace.meta.get("power", {})
    drones = []
    cost_total = 0.0
    for d in sorted(scenario.fleet, key=lambda d: natural_key(d.id)):
        tethered = power.get(d.id) == "tethered"
        hours = makespan
        cost = hours * scenario.cost_rate(d.role) + (scenario.tether_fixed_cost if tethered else 0.0)
        cost_total += cost
        work = done.get(d.id, 0)
        drones.append(DroneMetrics(
            id=d.id,
            role=d.role.value,
            power="tethered" if tethered else "battery",
            completed_work=work,
            bound_phases=bound.get(d.id, 0),
            active_phases=active.get(d.id, 0),
            utilization=round(bound.get(d.id, 0) / n_e, 9) if n_e else 0.0,
            productivity=round(work / makespan, 9) if makespan else 0.0,
            drone_hours=hours,
            cost=round(cost, 9),
        ))

    completed = sum(done.values())
    fleet = len(scenario.fleet)
    productivity = round(completed / (fleet * makespan), 9) if makespan and fleet else 0.0
    complete = bool(trace.meta.get("complete", False))
    budget = check_time_budget(makespan, scenario.budget_max_hours)
    report = SimReport(
        functionality_complete=complete,
        makespan_hours=makespan,
        estar_phase_count=n_e,
        cstar_phase_count=n_c,
        total_work=trace.meta.get("total_work", completed),
        completed_work=completed,
        fleet_size=fleet,
        fleet_productivity=productivity,
        cost_total=round(cost_total, 9),
        budget=budget,
        ilities={
            "Functionality": "complete" if complete else "incomplete",
            "Productivity": productivity,
            "Performance": makespan,
            "Cost": round(cost_total, 9),
        },
        drones=drones,
        starvation_events=list(trace.meta.get("starvation_events", [])),
        stall=trace.meta.get("stall"),
        final_inventory=dict(trace.meta.get("final_inventory", {})),
        payload={k: trace.meta.get(k, 0) for k in ("initial_production", "consumed", "in_transit")},
        seed=trace.seed,
        scenario_digest=trace.scenario_digest,
        plan_digest=trace.meta.get("plan_digest", ""),
        trace_digest=trace.digest(),
        goal_trees=trace.meta.get("goal_trees", {}),
        trace=trace,
    )
    return report


_CSV_FIELDS = ["id", "role", "power", "completed_work", "bound_phases", "active_phases", "utilization",
               "productivity", "drone_hours", "cost"]


def _to_csv(report: SimReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_CSV_FIELDS)
    for d in report.drones:
        row = asdict(d)
        writer.writerow([row[f] for f in _CSV_FIELDS])
    writer.writerow(["FLEET", "", "", report.completed_work, "", "", "",
                     report.fleet_productivity, round(report.makespan_hours * report.fleet_size, 9),
                     report.cost_total])
    return buf.getvalue()


def _to_text(report: SimReport) -> str:
    b = report.budget
    lines = [
        f"functionality : {report.ilities['Functionality']} ({report.completed_work}/{report.total_work} work-units)",
        f"makespan      : {report.makespan_hours:g} h ({report.estar_phase_count} E*, {report.cstar_phase_count} C*)",
        f"productivity  : {report.fleet_productivity:g} work-units per drone-hour ({report.fleet_size} drones)",
        f"cost          : {report.cost_total:g}",
        f"budget        : {'PASS' if b.passed else 'FAIL'} (limit {b.budget_max_hours:g} h, margin {b.margin_hours:g} h)",
    ]
    if report.starvation_events:
        lines.append(f"starvation    : {len(report.starvation_events)} payload starvation events")
    if report.stall:
        lines.append(f"stall         : compartments {report.stall['starved_compartments']} "
                     f"blocked on {report.stall['blocking_resources'] or 'no shared resource'}")
    lines.append("drones:")
    for d in report.drones:
        lines.append(f"  {d.id:<10} {d.role:<15} {d.power:<8} work={d.completed_work:<6} util={d.utilization:.3f}")
    return "\n".join(lines) + "\n"


def render_report(report: SimReport, fmt: str = "json") -> str:
    if fmt == "json":
        return json.dumps(report.to_dict(), indent=2) + "\n"
    if fmt == "csv":
        return _to_csv(report)
    if fmt == "text":
        return _to_text(report)
    raise ValueError(f"unknown report format {fmt!r}")


def emit_report(report: SimReport, fmt: str = "json", out: str | Path | TextIO | None = None) -> str:
    """Write the report to a path, a stream, or standard output; returns the text."""
    text = render_report(report, fmt)
    if out is None:
        sys.stdout.write(text)
    elif hasattr(out, "write"):
        out.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return text
