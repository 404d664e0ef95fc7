import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from landwork.compartments import IntersectionRelation
from landwork.coordination import (BROKER, CoordinationError, ResourceRequest, StigmergyBoard, broker_resolve,
                                   elect_leader, leader_resolve, post_and_aggregate)


def req(cid, res, rem=1, phase=0):
    return ResourceRequest(cid, res, rem, phase)


def test_leader_rotation_examples():
    rel = IntersectionRelation((1, 3), ("R",))
    assert [elect_leader(rel, q) for q in range(4)] == [1, 3, 1, 3]
    assert all(elect_leader([2], q) == 2 for q in range(5))
    assert elect_leader(IntersectionRelation((5, 2, 9), ("R",)), 4) == 5
    with pytest.raises(CoordinationError):
        elect_leader([], 0)


def test_broker_examples():
    grants, orders = broker_resolve([req(0, "R", 10), req(1, "R", 5)])
    assert [(g.resource_id, g.grantee) for g in grants] == [("R", 0)]
    assert [(o.issuer, o.target, o.directive) for o in orders] == [(BROKER, 0, "grant"), (BROKER, 1, "wait")]
    assert broker_resolve([]) == ([], [])
    grants, _ = broker_resolve([req(0, "R1"), req(1, "R2")])
    assert {(g.resource_id, g.grantee) for g in grants} == {("R1", 0), ("R2", 1)}


def test_broker_tie_goes_to_lowest_id():
    grants, _ = broker_resolve([req(4, "R", 7), req(2, "R", 7)])
    assert grants[0].grantee == 2


def test_leader_examples():
    rel = [IntersectionRelation((0, 1), ("R",))]
    grants, orders = leader_resolve(rel, [req(0, "R", 1), req(1, "R", 99)], 0)
    assert [(g.resource_id, g.grantee) for g in grants] == [("R", 0)]
    assert orders[0].issuer == 0
    grants, _ = leader_resolve(rel, [req(1, "R")], 0)
    assert grants[0].grantee == 1
    grants, _ = leader_resolve(rel, [req(0, "R", 99), req(1, "R", 1)], 1)
    assert grants[0].grantee == 1


def test_leader_rejects_unknown_resource():
    with pytest.raises(CoordinationError):
        leader_resolve([IntersectionRelation((0, 1), ("R",))], [req(0, "X")], 0)


@st.composite
def request_sets(draw):
    n_res = draw(st.integers(1, 5))
    k = draw(st.integers(2, 6))
    relations = []
    for r in range(n_res):
        members = draw(st.lists(st.integers(0, k - 1), min_size=2, max_size=k, unique=True))
        relations.append(IntersectionRelation(tuple(sorted(members)), (f"R{r}",)))
    requests = []
    for rel in relations:
        for m in draw(st.lists(st.sampled_from(rel.members), unique=True)):
            requests.append(req(m, rel.shared_resources[0], draw(st.integers(0, 50))))
    return relations, requests, draw(st.integers(0, 30))


def check_safety_liveness(relations, requests, phase):
    requested = {r.resource_id for r in requests}
    counts = {}
    for name, (grants, _) in {"broker": broker_resolve(requests),
                              "leader": leader_resolve(relations, requests, phase)}.items():
        per = {}
        for g in grants:
            per[g.resource_id] = per.get(g.resource_id, 0) + 1
            assert any(r.compartment_id == g.grantee and r.resource_id == g.resource_id for r in requests)
        assert all(n <= 1 for n in per.values()), name
        assert set(per) == requested, name
        counts[name] = len(grants)
    assert counts["broker"] == counts["leader"]


@settings(max_examples=400, deadline=None)
@given(request_sets())
def test_coordination_safety_and_liveness(case):
    check_safety_liveness(*case)


def test_board_ttl():
    board = StigmergyBoard()
    board.post("I0/c0.progress", 7, 3, ttl=2)
    assert board.read("I0/c0.progress", 3) == 7
    assert board.read("I0/c0.progress", 4) == 7
    assert board.read("I0/c0.progress", 5) is None
    assert board.purge(5) == ["I0/c0.progress"]


def test_aggregate_sums_by_intersection():
    board = StigmergyBoard()
    _, digest = post_and_aggregate(board, [("I0/a", 3), ("I0/b", 4), ("I1/a", 1)], 0)
    assert digest == {"I0": 7, "I1": 1}


def test_aggregate_non_numeric_is_multiset():
    _, digest = post_and_aggregate(StigmergyBoard(), [("I0/a", "busy"), ("I0/b", "busy"), ("I0/c", "idle")], 0)
    assert digest == {"I0": {"busy": 2, "idle": 1}}


def test_empty_messages_only_purge():
    board = StigmergyBoard()
    board.post("I0/a", 1, 0, ttl=2)
    board.post("I0/b", 2, 1, ttl=2)
    _, digest = post_and_aggregate(board, [], 2)
    assert set(board.entries) == {"I0/b"}
    assert digest == {"I0": 2}
    _, digest = post_and_aggregate(board, [], 3)
    assert digest == {} and board.entries == {}


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 10), st.integers(0, 3), st.integers(-5, 5)), max_size=30),
       st.integers(1, 4))
def test_board_digest_matches_manual_reduction(posts, ttl):
    board = StigmergyBoard()
    live = {}
    for phase in range(12):
        msgs = [(f"I{key}/m{i}", v) for i, (p, key, v) in enumerate(posts) if p == phase]
        _, digest = post_and_aggregate(board, msgs, phase, ttl)
        for k, v in msgs:
            live[k] = (v, phase)
        expected = {}
        for k, (v, posted) in live.items():
            if posted <= phase < posted + ttl:
                g = k.split("/")[0]
                expected[g] = expected.get(g, 0) + v
        assert digest == expected
