import sys

from landwork.scenario import scenario_from_dict


def scenario_doc(works, *, k=None, drones=1, rate=10, payload=0, coupling="none", tick=0.1,
                 segment_ft=100.0, strategy="LeaderElection", scheme="RoundRobin", fanout=None,
                 power=None, tether_rule=True, stall_limit=100, hq_stock=0, fieldops_stock=None,
                 policy=None, seed=0, ferries=1, extra_policies=None):
    """Scenario document with one segment per entry of ``works``.

    ``drones`` is an int (same crew in every compartment) or a list per
    compartment; field drones sit on the first segment of their compartment
    when ``k`` equals the segment count.
    """
    n = len(works)
    k = n if k is None else k
    payload = [payload] * n if isinstance(payload, int) else list(payload)
    segments = [{"id": i, "length_ft": segment_ft, "height_ft": 300.0, "width_ft": 400.0,
                 "work_required": {"StructureAssembly": w}, "payload_required": payload[i]}
                for i, w in enumerate(works)]
    sites = [
        {"id": "HQ", "kind": "CentralHQ", "inventory": hq_stock, "position_ft": None},
        {"id": "SUP", "kind": "SupplyStation", "inventory": 0, "position_ft": n * segment_ft / 2},
        {"id": "STG", "kind": "FieldStagingArea", "inventory": 0, "position_ft": n * segment_ft / 2},
    ]
    if fieldops_stock is not None:
        stock = [fieldops_stock] * k if isinstance(fieldops_stock, int) else list(fieldops_stock)
        size = n // k
        for c in range(k):
            sites.append({"id": f"FO{c}", "kind": "FieldOps", "inventory": stock[c],
                          "position_ft": (c * size + size / 2) * segment_ft})
    crew = [drones] * k if isinstance(drones, int) else list(drones)
    size = n // k
    fleet = []
    for c, count in enumerate(crew):
        for j in range(count):
            d = {"id": f"f{c}-{j}", "role": "FieldOperation", "capabilities": ["StructureAssembly"],
                 "work_rate": rate, "location": c * size}
            if power is not None:
                d["power"] = power
            fleet.append(d)
    for j in range(ferries):
        fleet.append({"id": f"ferry{j}", "role": "FerryTaxi", "capabilities": ["PackageDelivery"],
                      "work_rate": 1, "location": "HQ", "power": {"type": "battery", "capacity_hours": 1000.0}})
    policies = {
        "compartment": policy or {"type": "FixedCount", "k": k},
        "coordination": strategy,
        "multiplex": scheme,
        "coupling": coupling,
        "tick_hours": tick,
        "stall_limit": stall_limit,
        "tether_rule": tether_rule,
    }
    if fanout is not None:
        policies["fanout"] = list(fanout)
    policies.update(extra_policies or {})
    return {"structure": {"segments": segments}, "sites": sites, "fleet": fleet, "policies": policies,
            "seed": seed}


def make_scenario(works, **kw):
    return scenario_from_dict(scenario_doc(works, **kw))


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
