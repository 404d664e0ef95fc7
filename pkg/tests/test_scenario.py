import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from landwork.compartments import FixedCount
from landwork.coordination import CStrategy
from landwork.fleet import Battery
from landwork.scenario import (ScenarioError, dump_scenario, load_scenario, loads_scenario,
                               reference_scenario_path, scenario_from_dict, scenario_to_dict,
                               scenario_warnings)
from landwork.structure import LandscapeStructure, Segment, validate_structure
from landwork.work_os import MultiplexScheme

MINIMAL = {
    "structure": {"segments": [{"id": 0, "length_ft": 5280, "height_ft": 500, "width_ft": 500,
                                "work_required": 10}]},
    "sites": [
        {"id": "HQ", "kind": "CentralHQ"},
        {"id": "S", "kind": "SupplyStation", "position_ft": 0},
        {"id": "G", "kind": "FieldStagingArea", "position_ft": 0},
        {"id": "F", "kind": "FieldOps", "position_ft": 2640},
    ],
    "fleet": [{"id": "d0", "role": "FieldOperation", "capabilities": ["StructureAssembly"]}],
}


def _seg(i, start, length=100.0, height=300.0, width=400.0):
    return Segment(i, start, length, height, width, {"StructureAssembly": 1}, 0)


def test_minimal_file_fills_defaults(tmp_path):
    path = tmp_path / "min.scenario"
    path.write_text(json.dumps(MINIMAL))
    sc = load_scenario(path)
    assert len(sc.structure.segments) == 1
    assert sc.structure.segments[0].work_required == {"StructureAssembly": 10}
    assert sc.compartment_policy == FixedCount(1)
    assert sc.coordination is CStrategy.LEADER_ELECTION
    assert sc.multiplex is MultiplexScheme.ROUND_ROBIN
    assert sc.tick_hours == 0.1
    assert sc.c_phase_overhead_ticks == 0
    assert sc.budget_max_hours == 10.0
    assert sc.seed == 0
    assert sc.fleet[0].power == Battery()
    assert sc.fleet[0].work_rate == 1


def test_contiguity_error_names_segment():
    doc = json.loads(json.dumps(MINIMAL))
    doc["structure"]["segments"] = [
        {"id": 0, "start_ft": 0, "length_ft": 400, "height_ft": 300, "width_ft": 400},
        {"id": 1, "start_ft": 500, "length_ft": 400, "height_ft": 300, "width_ft": 400},
    ]
    with pytest.raises(ScenarioError) as err:
        scenario_from_dict(doc)
    assert "segments[1]" in err.value.field
    assert "500" in str(err.value)


def test_reference_scenario_has_no_length_warning():
    sc = load_scenario(reference_scenario_path())
    assert len(sc.structure.segments) == 10
    assert len(sc.fleet) == 20
    assert sc.structure.total_length_ft == 5280.0
    codes = {w.code for w in scenario_warnings(sc)}
    assert not any(c.startswith("length") for c in codes)
    assert codes == set()


def test_json_syntax_error_reports_line():
    with pytest.raises(ScenarioError) as err:
        loads_scenario('{\n  "structure": {\n  oops\n}')
    assert err.value.line == 3


@pytest.mark.parametrize("mutate, field", [
    (lambda d: d["fleet"][0].update(location="NOWHERE"), "fleet[0].location"),
    (lambda d: d["fleet"][0].update(power={"type": "tethered", "anchor_site": "X"}), "fleet[0].power.anchor_site"),
    (lambda d: d["sites"].append({"id": "HQ2", "kind": "CentralHQ"}), "sites"),
    (lambda d: d.update(bogus=1), "bogus"),
    (lambda d: d.update(policies={"tick_hours": 0}), "policies.tick_hours"),
    (lambda d: d.update(policies={"compartment": {"type": "FixedCount", "k": 3}}), "policies.compartment.k"),
    (lambda d: d["sites"].pop(2), "sites"),
])
def test_invalid_documents_name_the_field(mutate, field):
    doc = json.loads(json.dumps(MINIMAL))
    mutate(doc)
    with pytest.raises(ScenarioError) as err:
        scenario_from_dict(doc)
    assert err.value.field == field


def test_round_trip(tmp_path):
    sc = load_scenario(reference_scenario_path())
    path = tmp_path / "copy.scenario"
    dump_scenario(sc, path)
    again = load_scenario(path)
    assert again == sc
    assert scenario_to_dict(again) == scenario_to_dict(sc)


def test_validate_structure_examples():
    mile = LandscapeStructure((Segment(0, 0.0, 5280.0, 500.0, 500.0, {}, 0),))
    assert validate_structure(mile) == []
    short = LandscapeStructure((Segment(0, 0.0, 100.0, 500.0, 500.0, {}, 0),))
    (w,) = validate_structure(short)
    assert w.code == "length_below_range" and "below landscape scale" in w.message
    tall = LandscapeStructure((Segment(0, 0.0, 5280.0, 2000.0, 500.0, {}, 0),))
    (w,) = validate_structure(tall)
    assert w.code == "height_above_range"


def test_fleet_size_advisory():
    doc = json.loads(json.dumps(MINIMAL))
    codes = {w.code for w in scenario_warnings(scenario_from_dict(doc))}
    assert "fleet_size_below_range" in codes


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(1, 3000), min_size=1, max_size=6),
       st.floats(10, 3000), st.floats(10, 3000))
def test_validate_structure_is_pure_and_consistent(lengths, height, width):
    start = 0.0
    segs = []
    for i, length in enumerate(lengths):
        segs.append(Segment(i, start, length, height, width, {}, 0))
        start += length
    s = LandscapeStructure(tuple(segs))
    first = validate_structure(s)
    assert validate_structure(s) == first
    codes = {w.code for w in first}
    total = sum(lengths)
    assert ("length_below_range" in codes) == (total < 5280.0)
    assert ("length_above_range" in codes) == (total > 52800.0)
    assert ("height_below_range" in codes) == (height < 100.0)
    assert ("width_above_range" in codes) == (width > 1000.0)
