import itertools
from collections import Counter

import networkx as nx
import pytest

from dwrp.core import make_instance, metric_closure, serialize_instance, validate_walk
from dwrp.hardness import (CDSInstance, InvalidCDSWitness, build_cds_reduction, build_witness_walk,
                           cds_brute_force, check_cds_witness, gen_cover_gadget, gen_force_gadget, gen_random,
                           parse_cds, reduction_budget, serialize_cds)
from dwrp.oracle import Status, oracle_solve


def test_force_gadget_counts():
    g = gen_force_gadget(1)
    assert len(g.vertices) == 4 and len(g.arcs) == 3
    g = gen_force_gadget(5)
    assert len(g.vertices) == 8 and len(g.arcs) == 11
    caps = {(a, b): c for a, b, c in g.arcs}
    assert caps[("F.w", "F.u_out")] == 5
    assert sum(c is not None for c in caps.values()) == 1


def test_force_gadget_traversed_exactly_p_times():
    for p in (1, 2):
        frag = gen_force_gadget(p)
        names = ["h0", "h1"] + frag.vertices
        ids = {v: i for i, v in enumerate(names)}
        arcs = [(ids[a], ids[b], 1, c) for a, b, c in frag.arcs]
        arcs += [(0, 1, 1, None), (1, 0, 1, None), (1, ids["F.u_in"], 1, None), (ids["F.u_out"], 0, 1, None)]
        W = [0] + [ids[t] for t in frag.terminals]
        inst = make_instance(len(names), arcs, W)
        sol = oracle_solve(inst)
        assert sol.status is Status.OPTIMAL
        out_arc = next(i for i, a in enumerate(inst.arcs) if (a.tail, a.head) == (ids["F.w"], ids["F.u_out"]))
        in_arc = next(i for i, a in enumerate(inst.arcs) if a.head == ids["F.u_in"])
        ms = Counter(sol.walk.arcs)
        assert ms[out_arc] == p and ms[in_arc] == p


def directed_path_ok(frag, path):
    arcs = {(a, b) for a, b, _ in frag.arcs}
    return all((a, b) in arcs for a, b in zip(path, path[1:])) and len(set(path)) == len(path)


def test_cover_gadget_shape():
    g = gen_cover_gadget("z")
    # 22 terminals plus two subdivision vertices on each of the 26 edges and arcs
    assert len(g.vertices) == 74 == len(set(g.vertices))
    assert len(g.terminals - {"z"}) == 21
    for name in ("R1", "R2", "P"):
        assert directed_path_ok(g, g.paths[name])
    R1, R2, P = (set(g.paths[k]) for k in ("R1", "R2", "P"))
    assert g.terminals - R1 == {"z"}
    assert g.terminals <= R2 | P
    assert not R2 & P
    arcs_of = lambda p: set(zip(p, p[1:]))
    assert not arcs_of(g.paths["R2"]) & arcs_of(g.paths["P"])


def test_reduction_respects_port_directions():
    cds = CDSInstance(3, [(0, 1), (1, 2)], {0: 1, 1: 2, 2: 1}, 1)
    red = build_cds_reduction(cds)
    names = {i: v for v, i in red.ids.items()}

    def gadget(v):
        return v.split(".")[0] if "." in v else None

    for a in red.instance.arcs:
        t, h = names[a.tail], names[a.head]
        if gadget(t) is not None and gadget(t) == gadget(h):
            continue
        if t.startswith("z") or h.startswith("z"):
            continue  # z vertices are shared io ports
        if gadget(t) is not None and gadget(t).startswith("E"):
            assert t.endswith((".t_out", ".y_out")), (t, h)
        if gadget(h) is not None and gadget(h).startswith("E"):
            assert h.endswith((".s_in", ".x_in")), (t, h)


def test_budget_formula():
    cds = CDSInstance(3, [(0, 1)], {0: 1, 1: 1, 2: 1}, 2)
    assert reduction_budget(cds) == 357
    red = build_cds_reduction(cds)
    assert red.instance.budget == 357 == 3 * red.terminals
    E, V, k = 1, 3, 2
    assert red.terminals == k + 1 + (2 * E + V + 1) + 2 + 21 * (2 * E + V) + V
    assert len(red.cover_paths) == V + 2 * E
    assert all(a.weight == 1 for a in red.instance.arcs)


def test_single_edge_witness():
    cds = CDSInstance(2, [(0, 1)], {0: 1, 1: 1}, 1)
    red = build_cds_reduction(cds)
    walk = build_witness_walk(cds, [0], {1: 0}, red)
    rep = validate_walk(red.instance, walk)
    assert rep.valid and rep.cost == red.instance.budget
    # every terminal once, consecutive terminals at distance 3
    vs = walk.vertices(red.instance)[:-1]
    W = red.instance.waypoints
    hits = [j for j, v in enumerate(vs) if v in W]
    assert Counter(vs[j] for j in hits) == Counter({w: 1 for w in W})
    d = metric_closure(red.instance)
    for a, b in zip(hits, hits[1:] + [hits[0] + len(vs)]):
        assert b - a == 3
        assert d(vs[a], vs[b % len(vs)]) == 3


def test_witness_rejects_overloaded_vertex():
    cds = CDSInstance(3, [(0, 1), (0, 2)], {0: 1, 1: 1, 2: 1}, 1)
    with pytest.raises(InvalidCDSWitness):
        build_witness_walk(cds, [0], {1: 0, 2: 0})
    with pytest.raises(InvalidCDSWitness):
        check_cds_witness(cds, [0, 1], {2: 1})


def test_brute_force_examples():
    yes, (S, f) = cds_brute_force(CDSInstance(2, [(0, 1)], {0: 1, 1: 1}, 1))
    assert yes and len(S) == 1
    c4 = CDSInstance(4, [(0, 1), (1, 2), (2, 3), (0, 3)], {v: 1 for v in range(4)}, 1)
    assert cds_brute_force(c4) == (False, None)
    star = CDSInstance(4, [(0, 1), (0, 2), (0, 3)], {0: 3, 1: 1, 2: 1, 3: 1}, 1)
    yes, (S, f) = cds_brute_force(star)
    assert yes and S == (0,)


def test_brute_force_matches_matching_free_check():
    """Cross-check against direct enumeration of domination mappings."""
    for n in range(1, 5):
        for mask in range(1 << (n * (n - 1) // 2)):
            edges = [e for j, e in enumerate(itertools.combinations(range(n), 2)) if mask >> j & 1]
            deg = [sum(v in e for e in edges) for v in range(n)]
            cds = CDSInstance(n, edges, {v: 1 for v in range(n)}, 1)
            nb = cds.neighbors()
            direct = False
            for s in range(n):
                rest = [v for v in range(n) if v != s]
                direct |= all(v in nb[s] for v in rest) and len(rest) <= 1
            assert cds_brute_force(cds)[0] == direct, (n, edges, deg)


def test_cds_text_round_trip():
    cds = CDSInstance(3, [(0, 1), (1, 2)], {0: 1, 1: 2, 2: 1}, 1)
    text = serialize_cds(cds)
    assert text.startswith("cds 1\n")
    assert parse_cds(text) == cds


def test_cds_rejects_bad_capacity():
    with pytest.raises(ValueError):
        CDSInstance(2, [(0, 1)], {0: 2, 1: 1}, 1)


def test_gen_random():
    a = serialize_instance(gen_random(5, seed=1))
    assert a == serialize_instance(gen_random(5, seed=1))
    assert gen_random(6, density=1.0).m == 30
    for seed in range(100):
        inst = gen_random(5, density=0.1, seed=seed, capacities=(1, 2), unbounded_prob=0.5)
        g = nx.DiGraph([(x.tail, x.head) for x in inst.arcs])
        assert nx.is_strongly_connected(g)
        assert oracle_solve(inst).status is not Status.INFEASIBLE
