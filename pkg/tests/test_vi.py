import itertools
import random
from collections import Counter

import pytest

from dwrp.core import make_instance, validate_walk
from dwrp.hardness import gen_random
from dwrp.oracle import Status, oracle_solve
from dwrp.structparams import UnderlyingGraph, _modulator_for, vertex_integrity
from dwrp.vi import (NFoldProgram, Skeleton, build_nfold, check_traversal, enumerate_connectors,
                     enumerate_segments, enumerate_skeletons, enumerate_traversals, solve_nfold, solve_vi)


def modulator(inst, M):
    g = UnderlyingGraph.from_instance(inst)
    comps = g.components(M)
    return _modulator_for(g, M, max([len(M)] + [len(c) for c in comps]))


def verts(inst, seg):
    return [inst.arcs[seg.arcs[0]].tail] + [inst.arcs[i].head for i in seg.arcs]


def test_single_vertex_component_pass():
    # M = {0, 2}, component {1}
    inst = make_instance(3, [(0, 1, 1, None), (1, 2, 1, None), (2, 0, 1, None)], [0, 1])
    mod = modulator(inst, [0, 2])
    segs = enumerate_segments(inst, mod, (1,))
    assert [verts(inst, s) for s in segs] == [[0, 1, 2]]


def test_single_vertex_component_out_and_back():
    inst = make_instance(2, [(0, 1, 1, None), (1, 0, 1, None)], [0, 1])
    mod = modulator(inst, [0])
    segs = enumerate_segments(inst, mod, (1,))
    assert [verts(inst, s) for s in segs] == [[0, 1, 0]]


# ---------------------------------------------------------------- independent segment oracle

def walks_between(inst, M, C, cap):
    """All walks u -> (internal vertices in C) -> v with u, v in M and at most cap arcs."""
    out = inst.out_arcs()
    res = []

    def dfs(x, path):
        if len(path) >= cap:
            return
        for i in out[x]:
            h = inst.arcs[i].head
            if h in M:
                if path:
                    res.append(tuple(path + [i]))
            elif h in C:
                dfs(h, path + [i])

    for u in sorted(M):
        dfs(u, [])
    return res


def brute_minimal(inst, arcs, M):
    """Try every walk from u over sub-multisets of `arcs`; minimal iff none is shorter and covers as much."""
    W = inst.waypoints
    vs = [inst.arcs[arcs[0]].tail] + [inst.arcs[i].head for i in arcs]
    u, v = vs[0], vs[-1]
    need = {x for x in vs[1:-1] if x in W}
    budget = Counter(arcs)

    def dfs(x, used, seen):
        for i in list(budget):
            a = inst.arcs[i]
            if a.tail != x or not budget[i]:
                continue
            if a.head in M:
                if a.head == v and used + 1 < len(arcs) and need <= seen:
                    return True
                continue
            budget[i] -= 1
            hit = dfs(a.head, used + 1, seen | ({a.head} & W))
            budget[i] += 1
            if hit:
                return True
        return False

    return not dfs(u, 0, set())


def test_segments_match_exhaustive_walks():
    rng = random.Random(17)
    tested = 0
    while tested < 12:
        inst = gen_random(rng.randint(4, 6), density=0.5, seed=rng.randrange(10 ** 6),
                          capacities=(1, 2), unbounded_prob=0.6, waypoints=rng.randint(2, 5))
        g = UnderlyingGraph.from_instance(inst)
        comps2 = [c for M in itertools.combinations(range(inst.n), 2) for c in g.components(M) if len(c) == 2]
        if not comps2:
            continue
        for M in itertools.combinations(range(inst.n), inst.n - 2):
            C = [v for v in range(inst.n) if v not in M]
            if len(g.components(M)) != 1:
                continue
            mod = modulator(inst, list(M))
            got = {s.arcs for s in enumerate_segments(inst, mod, tuple(C))}
            ref = {w for w in walks_between(inst, set(M), set(C), 9) if brute_minimal(inst, w, set(M))}
            assert got == ref
            tested += 1
            break


def test_connectors_are_simple_paths():
    inst = gen_random(6, density=0.5, seed=3)
    mod = modulator(inst, [0, 1])
    for ci, comp in enumerate(mod.components):
        for s in enumerate_connectors(inst, mod, comp, ci):
            vs = verts(inst, s)
            assert s.u != s.v and len(set(vs)) == len(vs)
            assert set(vs[1:-1]) <= set(comp)


def test_traversals_empty_when_no_waypoints():
    inst = make_instance(3, [(0, 1, 1, None), (1, 0, 1, None), (0, 2, 1, None), (2, 0, 1, None)], [0, 2])
    mod = modulator(inst, [0, 2])
    ts = enumerate_traversals(inst, mod, (1,))
    assert len(ts) == 1 and ts[0].segments == ()


def test_traversals_single_vertex():
    arcs = [(0, 1, 1, None), (1, 2, 1, None), (1, 0, 1, None), (2, 0, 1, None)]
    inst = make_instance(3, arcs, [0, 1])
    mod = modulator(inst, [0, 2])
    segs = enumerate_segments(inst, mod, (1,))
    assert sorted(verts(inst, s) for s in segs) == [[0, 1, 0], [0, 1, 2]]
    ts = enumerate_traversals(inst, mod, (1,), segs)
    assert sorted(t.segments for t in ts) == [(0,), (1,)]


def test_traversals_satisfy_conditions():
    rng = random.Random(5)
    for _ in range(10):
        inst = gen_random(rng.randint(4, 7), density=0.4, seed=rng.randrange(10 ** 6),
                          capacities=(1, 2), unbounded_prob=0.6, waypoints=rng.randint(2, 5))
        mod = vertex_integrity(UnderlyingGraph.from_instance(inst), 3)
        if mod is None:
            continue
        for ci, comp in enumerate(mod.components):
            segs = enumerate_segments(inst, mod, comp, ci)
            for t in enumerate_traversals(inst, mod, comp, segs):
                if t.segments:
                    assert check_traversal(inst, comp, [segs[j] for j in t.segments], mod.M) == []


def test_skeletons_single_vertex():
    inst = make_instance(2, [(0, 1, 1, None), (1, 0, 1, None)], [0, 1])
    sk = enumerate_skeletons(modulator(inst, [0]), {0, 1})
    assert sk == [Skeleton(frozenset(), frozenset(), frozenset({0}))]


def two_vertex_modulator():
    inst = make_instance(3, [(0, 1, 1, None), (1, 0, 1, None), (0, 2, 1, None), (2, 1, 1, None)], [0, 1, 2])
    return modulator(inst, [0, 1])


def test_skeletons_two_vertices_no_waypoints():
    sk = enumerate_skeletons(two_vertex_modulator(), set())
    unions = [s.H for s in sk]
    assert frozenset() in unions
    assert all(len(u) != 1 for u in unions)
    assert any(len(u) == 2 for u in unions)


def test_skeletons_two_vertices_both_waypoints():
    sk = enumerate_skeletons(two_vertex_modulator(), {0, 1})
    assert len(sk) == 9
    brute = [(h0, h1) for h0 in itertools.product([0, 1], repeat=2) for h1 in itertools.product([0, 1], repeat=2)
             if all(a or b for a, b in zip(h0, h1))]
    assert len(brute) == 9


def test_nfold_fully_inside_modulator(two_cycle):
    mod = modulator(two_cycle, [0, 1])
    skel = Skeleton(frozenset({(0, 1), (1, 0)}), frozenset(), frozenset({0, 1}))
    p = build_nfold(two_cycle, mod, skel, [], [], [])
    assert all(b.startswith("arc") for b in p.bricks)
    assert solve_nfold(p)[0] == 2


def test_nfold_one_component_two_traversals():
    arcs = [(0, 1, 1, None), (1, 2, 1, None), (1, 0, 1, None), (2, 0, 1, None)]
    inst = make_instance(3, arcs, [0, 1])
    mod = modulator(inst, [0, 2])
    segs = enumerate_segments(inst, mod, (1,))
    ts = enumerate_traversals(inst, mod, (1,), segs)
    skel = Skeleton(frozenset({(2, 0)}), frozenset({(0, 2)}), frozenset({0, 2}))
    p = build_nfold(inst, mod, skel, [segs], [ts], [[]])
    ys = [v for v in p.variables if v.name[0] == "traversal"]
    assert len(ys) == 2 and all(v.lb == 0 and v.ub == 1 for v in ys)
    local = p.locals_of(0)
    assert any(set(c.coeffs.values()) == {1} and c.lo == c.hi == 1 and len(c.coeffs) == 2 for c in local)


def test_nfold_trivial_programs():
    p = NFoldProgram()
    for j in range(3):
        p.add_var(("x", j), 0, 2, j + 1, j)
    assert solve_nfold(p) == (0, [0, 0, 0])
    q = NFoldProgram()
    x = q.add_var(("x",), 0, 1, 5, 0)
    q.add({x: 1}, 1, float("inf"))
    assert solve_nfold(q) == (5, [1])


def test_nfold_matches_grid_brute_force():
    rng = random.Random(33)
    for _ in range(40):
        p = NFoldProgram()
        nv = rng.randint(1, 6)
        for j in range(nv):
            p.add_var(("x", j), 0, rng.randint(1, 3), rng.randint(-3, 6), j % 2)
        for _ in range(rng.randint(1, 4)):
            coeffs = {j: rng.randint(-2, 2) for j in rng.sample(range(nv), rng.randint(1, nv))}
            lo = rng.randint(-2, 2)
            p.add(coeffs, lo, lo + rng.choice([0, 1, 3, float("inf")]), rng.choice([None, 0, 1]))
        best = None
        for x in itertools.product(*[range(v.lb, v.ub + 1) for v in p.variables]):
            if p.satisfied(x):
                val = p.objective(x)
                best = val if best is None else min(best, val)
        res = solve_nfold(p)
        assert (res is None) == (best is None)
        if res is not None:
            assert res[0] == best and p.satisfied(res[1])


def test_solve_vi_small(two_cycle, star):
    assert solve_vi(two_cycle, modulator(two_cycle, [0])).cost == 2
    assert solve_vi(star, modulator(star, [0])).cost == 4


def test_solve_vi_matches_oracle():
    rng = random.Random(77)
    done = 0
    while done < 30:
        inst = gen_random(rng.randint(3, 10), density=rng.choice([0.15, 0.25]), seed=rng.randrange(10 ** 6),
                          capacities=(1, 2), unbounded_prob=0.7, waypoints=rng.randint(2, 6))
        mod = vertex_integrity(UnderlyingGraph.from_instance(inst), 3)
        if mod is None:
            continue
        got, ref = solve_vi(inst, mod), oracle_solve(inst)
        assert got.status == ref.status and got.cost == ref.cost
        if got.status is not Status.INFEASIBLE:
            assert validate_walk(inst, got.walk).valid
        k = mod.k
        assert got.stats["max_traversal_occurrences"] <= k * (k + 2)
        done += 1
