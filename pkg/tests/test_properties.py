from collections import Counter

from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from dwrp.colorcoding import solve_k_occurrences
from dwrp.core import (Instance, cycle_decompose, make_instance, multiset_to_walk, parse_instance,
                       serialize_instance, validate_walk)
from dwrp.fes import solve_fes
from dwrp.oracle import Status, oracle_solve
from dwrp.structparams import UnderlyingGraph, feedback_edge_set, vertex_integrity
from dwrp.twdp import solve_twdp
from dwrp.vi import solve_vi

from conftest import brute_force_cost

SETTINGS = settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@st.composite
def instances(draw, max_n=5, max_m=None):
    n = draw(st.integers(2, max_n))
    pairs = [(u, v) for u in range(n) for v in range(n) if u != v]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=max_m or len(pairs)))
    arcs = [(u, v, draw(st.integers(1, 6)), draw(st.sampled_from([None, None, 1, 2]))) for u, v in chosen]
    W = draw(st.lists(st.integers(0, n - 1), min_size=2, max_size=n, unique=True))
    return make_instance(n, arcs, W)


def solved(inst):
    sol = oracle_solve(inst)
    return sol if sol.status is not Status.INFEASIBLE else None


@SETTINGS
@given(instances())
def test_text_round_trip(inst):
    text = serialize_instance(inst)
    assert serialize_instance(parse_instance(text)) == text
    assert parse_instance(text).canonical() == inst.canonical()


@SETTINGS
@given(instances(max_n=4, max_m=6))
def test_oracle_matches_brute_force(inst):
    sol = oracle_solve(inst)
    ref = brute_force_cost(inst)
    assert sol.cost == ref
    if ref is not None:
        assert validate_walk(inst, sol.walk).valid


@SETTINGS
@given(instances())
def test_witness_structure(inst):
    sol = solved(inst)
    if sol is None:
        return
    walk = sol.walk
    # visit bound: each vertex at most |W - {v}| times
    visits = Counter(walk.vertices(inst)[:-1])
    for v, c in visits.items():
        assert c <= len(inst.waypoints - {v})
    # cycle decomposition and Hierholzer reassembly preserve the arc multiset
    tally = Counter(i for c in cycle_decompose(inst, walk) for i in c.arcs)
    assert tally == Counter(walk.arcs)
    again = multiset_to_walk(inst, walk.multiset(), walk.start(inst))
    assert Counter(again.arcs) == Counter(walk.arcs)
    assert validate_walk(inst, again).valid


@SETTINGS
@given(instances())
def test_solvers_agree(inst):
    ref = oracle_solve(inst)
    g = UnderlyingGraph.from_instance(inst)
    results = [solve_twdp(inst)]
    if len(feedback_edge_set(g)) <= 3:
        results.append(solve_fes(inst))
    mod = vertex_integrity(g, 3)
    if mod is not None:
        results.append(solve_vi(inst, mod))
    k = len(ref.walk.arcs) if ref.walk is not None else len(inst.waypoints)
    results.append(solve_k_occurrences(inst, max(k, 1)))
    for sol in results:
        assert sol.status == ref.status, sol.stats.get("method")
        assert sol.cost == ref.cost, sol.stats.get("method")
        if sol.walk is not None:
            assert validate_walk(inst, sol.walk).valid


@SETTINGS
@given(instances(), st.data())
def test_relaxations_never_cost_more(inst, data):
    sol = solved(inst)
    if sol is None:
        return
    # raising every capacity to unbounded
    loose = Instance(inst.n, [a.__class__(a.tail, a.head, a.weight, None) for a in inst.arcs], inst.waypoints)
    assert oracle_solve(loose).cost <= sol.cost
    # dropping one waypoint (keeping at least two)
    if len(inst.waypoints) > 2:
        drop = data.draw(st.sampled_from(sorted(inst.waypoints)))
        fewer = Instance(inst.n, inst.arcs, inst.waypoints - {drop})
        assert oracle_solve(fewer).cost <= sol.cost


@SETTINGS
@given(instances(max_n=4))
def test_visit_bound_monotone(inst):
    costs = [solve_twdp(inst, nu=nu, deepen=False).cost for nu in range(1, len(inst.waypoints) + 1)]
    finite = [c for c in costs if c is not None]
    assert finite == sorted(finite, reverse=True)
    # once feasible, a larger visit bound stays feasible
    assert costs[len(costs) - len(finite):] == finite
    assert costs[-1] == oracle_solve(inst).cost
