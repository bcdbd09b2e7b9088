import itertools
import math
import random

import numpy as np

from dwrp.colorcoding import (EXHAUSTIVE, RANDOMIZED, canonical_family, coloring_family,
                              expand_to_unit_multigraph, perfect_family, randomized_repeats,
                              solve_colorful, solve_k_occurrences)
from dwrp.core import make_instance, validate_walk
from dwrp.oracle import Status, oracle_solve, solve_enumeration

from conftest import random_instance


def test_expansion_counts():
    assert len(expand_to_unit_multigraph(make_instance(2, [(0, 1, 1, 3)], [0, 1]), 2).occurrences) == 2
    assert len(expand_to_unit_multigraph(make_instance(2, [(0, 1, 1, None)], [0, 1]), 4).occurrences) == 4
    inst = make_instance(3, [(0, 1, 1, 1), (1, 2, 1, 2), (2, 0, 1, None)], [0, 1])
    umg = expand_to_unit_multigraph(inst, 2)
    assert len(umg.occurrences) == 5
    assert umg.origin == (0, 1, 1, 2, 2)


def test_family_sizes():
    assert len(coloring_family(2, 2, EXHAUSTIVE)) == 4
    assert randomized_repeats(3, 0.01) == 93 == math.ceil(math.e ** 3 * math.log(100))
    fam = coloring_family(6, 3, RANDOMIZED, seed=1)
    assert len(fam) == 93 and fam.colorings.max() < 3
    again = coloring_family(6, 3, RANDOMIZED, seed=1)
    assert np.array_equal(fam.colorings, again.colorings)


def test_solve_colorful_two_cycle():
    inst = make_instance(2, [(0, 1, 1, 1), (1, 0, 1, 1)], [0, 1])
    umg = expand_to_unit_multigraph(inst, 2)
    assert solve_colorful(umg, 0, [0, 1], inst) == 2
    assert solve_colorful(umg, 0, [0, 0], inst) == math.inf


def test_solve_colorful_triangle(triangle):
    umg = expand_to_unit_multigraph(triangle, 3)
    # three copies per arc; give the first copy of each arc a distinct color
    coloring = [0, 0, 0, 1, 1, 1, 2, 2, 2]
    assert solve_colorful(umg, 0, coloring, triangle) == 3 == oracle_solve(triangle).cost


def test_k_occurrences_two_cycle(two_cycle):
    assert solve_k_occurrences(two_cycle, 2).cost == 2
    assert solve_k_occurrences(two_cycle, 1).status is Status.INFEASIBLE


def test_k_occurrences_matches_oracle_at_witness_length():
    rng = random.Random(5)
    found = 0
    while found < 5:
        inst = random_instance(rng, nmax=5, pedge=0.5)
        sol = oracle_solve(inst)
        if sol.status is Status.INFEASIBLE or len(sol.walk.arcs) != 5:
            continue
        cc = solve_k_occurrences(inst, 5, EXHAUSTIVE)
        assert cc.cost == sol.cost
        assert validate_walk(inst, cc.walk).valid and len(cc.walk.arcs) <= 5
        found += 1


def test_k_occurrences_matches_bounded_enumeration():
    rng = random.Random(21)
    for _ in range(30):
        inst = random_instance(rng, nmax=5)
        k = rng.randint(2, 5)
        ref = solve_enumeration(inst, max_total=k)
        got = solve_k_occurrences(inst, k, EXHAUSTIVE)
        assert got.status == ref.status
        assert got.cost == ref.cost


def test_canonical_family_equals_literal_family():
    rng = random.Random(2)
    for _ in range(6):
        inst = random_instance(rng, nmax=3, pedge=0.7, pcap=0.8)
        k = 3
        umg = expand_to_unit_multigraph(inst, k)
        if not umg.occurrences or len(umg.occurrences) > 8:
            continue
        w0 = min(inst.waypoints)
        literal = coloring_family(len(umg.occurrences), k, EXHAUSTIVE)
        canon = canonical_family(umg)
        a = min(solve_colorful(umg, w0, c, inst) for c in literal.colorings)
        b = min(solve_colorful(umg, w0, c, inst) for c in canon.colorings)
        assert a == b


def test_randomized_mode_is_seeded(two_cycle):
    a = solve_k_occurrences(two_cycle, 2, RANDOMIZED, seed=3)
    b = solve_k_occurrences(two_cycle, 2, RANDOMIZED, seed=3)
    assert a.cost == b.cost == 2 and a.walk == b.walk


def test_perfect_family_covers_every_subset():
    for m, k in [(6, 3), (9, 4), (3, 5)]:
        fam = perfect_family(m, k, seed=2)
        assert fam.colorings.max() < k
        r = min(m, k)
        for sub in itertools.combinations(range(m), r):
            assert any(len(set(row[list(sub)])) == r for row in fam.colorings)


def test_exhaustive_falls_back_when_canonical_family_is_too_large():
    # complete digraph on 4 vertices, every arc tight and on an optimal 4-cycle
    arcs = [(a, b, 1, 1) for a in range(4) for b in range(4) if a != b]
    inst = make_instance(4, arcs, [0, 1, 2, 3])
    got = solve_k_occurrences(inst, 4, EXHAUSTIVE)
    assert got.cost == oracle_solve(inst).cost == 4
    assert validate_walk(inst, got.walk).valid
