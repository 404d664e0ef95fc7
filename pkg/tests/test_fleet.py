import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from landwork.fleet import (Battery, Capability, DroneRole, PhysicalDrone, Tethered, VirtualDrone,
                            advance_power_state, apply_tether_rule, capability_match, is_runnable)

SA = Capability.STRUCTURE_ASSEMBLY


def drone(power=None, role=DroneRole.FIELD_OPERATION, caps=(SA,)):
    return PhysicalDrone("p0", role, frozenset(caps), 10, power or Battery(1.0, 1))


def virtual(cap=SA):
    return VirtualDrone("v0", "leaf", 0, cap, 10)


@pytest.mark.parametrize("hours, tethered", [(0.5, False), (2.0, True), (1.0, False), (1.0000001, True)])
def test_tether_threshold_is_strict(hours, tethered):
    power = apply_tether_rule(drone(), hours, "FO0")
    assert isinstance(power, Tethered) is tethered
    if not tethered:
        assert power == Battery(1.0, 1)
    else:
        assert power.anchor_site == "FO0" and power.reach_ft == 1000.0


def test_tether_requires_anchor():
    with pytest.raises(ValueError):
        apply_tether_rule(drone(), 3.0)


def test_battery_runs_out_after_capacity():
    d = drone(Battery(1.0, 2))
    d = advance_power_state(d, True, 0.5)
    assert is_runnable(d, 0.5)
    d = advance_power_state(d, True, 0.5)
    assert d.recharging and not is_runnable(d, 0.5)
    d = advance_power_state(d, False, 0.5)
    assert d.recharging
    d = advance_power_state(d, False, 0.5)
    assert not d.recharging and is_runnable(d, 0.5) and d.duty_clock_hours == 0.0


def test_tethered_never_recharges():
    d = drone(Tethered("FO0"))
    for _ in range(100):
        d = advance_power_state(d, True, 0.1)
    assert is_runnable(d, 0.1) and not d.recharging


def test_idle_battery_keeps_duty():
    d = drone()
    d = advance_power_state(d, True, 0.1)
    before = d.duty_clock_hours
    for _ in range(5):
        d = advance_power_state(d, False, 0.1)
    assert d.duty_clock_hours == before


@settings(max_examples=200, deadline=None)
@given(st.lists(st.booleans(), max_size=80), st.sampled_from([0.1, 0.25, 0.5]),
       st.sampled_from([0.5, 1.0, 2.0]), st.integers(0, 3))
def test_worked_span_never_exceeds_capacity(pattern, tick, capacity, recharge):
    d = drone(Battery(capacity, recharge))
    span = 0.0
    for want in pattern:
        work = want and is_runnable(d, tick)
        if work:
            span += tick
            assert span <= capacity + 1e-9
        elif d.recharging:
            span = 0.0
        d = advance_power_state(d, work, tick)
        if d.recharging:
            span = 0.0


def test_capability_match_examples():
    v = virtual(SA)
    assert capability_match(v, drone(caps=(SA, Capability.VERTICAL_MOVE)))
    assert not capability_match(v, drone(role=DroneRole.FERRY_TAXI, caps=(SA,)))
    assert not capability_match(virtual(Capability.PACKAGE_DELIVERY), drone(caps=(Capability.PHOTOGRAPHY,)))


def test_bind_captures_twin_state():
    p = drone()
    v = virtual()
    v.bind(p)
    assert v.bound_physical == "p0"
    assert v.twin_state == {"location": None, "duty_clock_hours": 0.0}
    v.unbind()
    assert v.bound_physical is None


def test_ferry_detection():
    ferry = PhysicalDrone("f", DroneRole.FERRY_TAXI, frozenset({Capability.PAYLOAD_HANDLING}), 1)
    assert ferry.is_ferry
    assert not drone().is_ferry
