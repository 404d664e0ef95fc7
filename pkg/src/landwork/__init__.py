"""Deterministic planner and simulator for drone teams deploying landscape-scale structures."""

from .compartments import (Compartment, CompartmentPlan, FixedCount, IntersectionRelation, PlanningError,
                           UniformLength, UniformWork, compartmentalize, derive_intersections)
from .coordination import CStrategy, StigmergyBoard, broker_resolve, elect_leader, leader_resolve
from .engine import PhaseTrace, Plan, Simulation, plan_scenario, run, simulate
from .fleet import Battery, Capability, DroneRole, PhysicalDrone, Tethered, VirtualDrone
from .goals import Ility, build_goal_trees
from .report import SimReport, check_time_budget, compute_metrics, emit_report
from .scenario import Scenario, ScenarioError, load_scenario, reference_scenario_path
from .structure import LandscapeStructure, Segment, Site, SiteKind, validate_structure
from .work_os import MultiplexScheme, bind_phase

__all__ = [
    "Battery", "CStrategy", "Capability", "Compartment", "CompartmentPlan", "DroneRole", "FixedCount",
    "Ility", "IntersectionRelation", "LandscapeStructure", "MultiplexScheme", "PhaseTrace", "PhysicalDrone",
    "Plan", "PlanningError", "Scenario", "ScenarioError", "Segment", "SimReport", "Simulation", "Site",
    "SiteKind", "StigmergyBoard", "Tethered", "UniformLength", "UniformWork", "VirtualDrone", "bind_phase",
    "broker_resolve", "build_goal_trees", "check_time_budget", "compartmentalize", "compute_metrics",
    "derive_intersections", "elect_leader", "emit_report", "leader_resolve", "load_scenario", "plan_scenario",
    "reference_scenario_path", "run", "simulate", "validate_structure",
]
