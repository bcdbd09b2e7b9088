"""Acceptance criteria 1-8, each reported as one PASS/FAIL line.

Criteria 1-5 share one bench pass over the full built-in corpus; criterion 8 runs the
`bench` command again and compares the two reports byte for byte.
"""
import contextlib
import io
import itertools
import math
import random
import time
from collections import Counter

import networkx as nx
import pytest

from dwrp.bench import ALGOS, format_report, run_bench
from dwrp.cli import main
from dwrp.colorcoding import EXHAUSTIVE, RANDOMIZED, solve_k_occurrences
from dwrp.core import make_instance, validate_walk
from dwrp.corpus import builtin
from dwrp.fes import TYPES, UNUSED, apply_degree_one_reductions, compress, decompose_paths, path_type_costs
from dwrp.hardness import (CDSInstance, build_cds_reduction, build_witness_walk, cds_brute_force,
                           gen_force_gadget, gen_random, reduction_budget)
from dwrp.oracle import Status, oracle_solve
from dwrp.structparams import UnderlyingGraph, feedback_edge_set
from dwrp.twdp import TWDP, build_decomposition

from conftest import record_criterion


@pytest.fixture(scope="module")
def bench():
    entries = builtin("all", seed=0)
    t0 = time.perf_counter()
    records = run_bench(entries, ALGOS, seed=0)
    return entries, records, time.perf_counter() - t0


def test_criterion_1_cross_solver_exactness(bench):
    entries, records, elapsed = bench
    bad = [r.name for r in records if not r.agree]
    invalid = []
    for e, r in zip(entries, records):
        for algo, walk in r.walks.items():
            if walk is not None and not validate_walk(e.instance.with_budget(None), walk).valid:
                invalid.append((r.name, algo))
    runs = Counter(a for r in records for a, c in r.costs.items() if c != "-")
    ok = not bad and not invalid and elapsed < 600
    record_criterion(1, ok, f"instances={len(records)} disagreements={len(bad)} invalid_walks={len(invalid)} "
                            f"runs={dict(sorted(runs.items()))} time={elapsed:.0f}s")
    assert not bad, bad[:10]
    assert not invalid, invalid[:10]
    assert elapsed < 600


def test_criterion_2_visit_bound(bench):
    entries, records, _ = bench
    checked = violations = 0
    for e, r in zip(entries, records):
        if not r.name.startswith("a-"):
            continue
        walk = r.walks.get("oracle")
        if walk is None:
            continue
        checked += 1
        inst = e.instance
        for v, c in Counter(walk.vertices(inst)[:-1]).items():
            if c > len(inst.waypoints - {v}):
                violations += 1
    record_criterion(2, violations == 0, f"witnesses={checked} violations={violations}")
    assert violations == 0


def test_criterion_3_fes_compression_bounds(bench):
    entries, records, _ = bench
    runs = branches = violations = 0
    for e, r in zip(entries, records):
        st = r.stats.get("fes")
        if st is None:
            continue
        runs += 1
        k = st["k"]
        if st["branches"] and (st["max_vertices"] > 14 * k or st["max_arcs"] > 20 * k):
            violations += 1
        # every typing the branching could try, not only those it explored
        red = apply_degree_one_reductions(e.instance)
        if red is None or len(red.waypoints) <= 1:
            continue
        cat = decompose_paths(red, feedback_edge_set(red.underlying()))
        tables = [path_type_costs(red, p) for p in cat.paths]
        br = [p for p, t in enumerate(tables) if t.internal_waypoints]
        opts = [[t for t in TYPES if t != UNUSED and tables[p].cost[t] < math.inf] for p in br]
        for choice in itertools.product(*opts):
            comp = compress(red, cat, tables, dict(zip(br, choice)))
            if comp is None:
                continue
            branches += 1
            if comp.instance.n > 14 * cat.k or comp.instance.m > 20 * cat.k:
                violations += 1
    record_criterion(3, violations == 0, f"fes_runs={runs} compressed_instances={branches} violations={violations}")
    assert violations == 0


def test_criterion_4_vi_traversal_bounds(bench):
    entries, records, _ = bench
    runs = violations = 0
    worst = (0, 0)
    for r in records:
        st = r.stats.get("vi")
        if st is None:
            continue
        runs += 1
        k = st["k"]
        occ, use = st["max_traversal_occurrences"], st["max_traversal_arc_use"]
        worst = (max(worst[0], occ), max(worst[1], use))
        if occ > k * (k + 2) or use > k:
            violations += 1
    record_criterion(4, violations == 0, f"vi_runs={runs} max_occurrences={worst[0]} max_arc_use={worst[1]} "
                                         f"violations={violations}")
    assert violations == 0


def test_criterion_5_twdp_root_formula(bench):
    entries, records, _ = bench
    rng = random.Random(0)
    picks = sorted(rng.sample(range(len(entries)), 50))
    mismatches = 0
    for j in picks:
        inst = entries[j].instance.with_budget(None)
        w0 = min(inst.waypoints)
        nu = len(inst.waypoints)
        dp = TWDP(inst, build_decomposition(inst, w0), nu)
        table = dp.run()
        vals = [table[key][0] for key in (((0,), (i,), (i,)) for i in range(1, nu + 1)) if key in table]
        recomputed = min(vals) if vals else None
        reported = records[j].costs["twdp"]
        expected = "INF" if recomputed is None else str(recomputed)
        if expected != reported or dp.root_answer()[0] != recomputed:
            mismatches += 1
    record_criterion(5, mismatches == 0, f"instances=50 mismatches={mismatches}")
    assert mismatches == 0


def colorcoding_fixtures(count=100, max_k=5):
    """Seeded yes-instances whose oracle optimum uses at most max_k arc occurrences."""
    out = []
    rng = random.Random(2024)
    while len(out) < count:
        inst = gen_random(rng.randint(3, 6), density=rng.choice([0.2, 0.35]), seed=rng.randrange(10 ** 6),
                          capacities=(1, 2), unbounded_prob=0.7, waypoints=rng.randint(2, 4))
        sol = oracle_solve(inst)
        if sol.status is Status.OPTIMAL and len(sol.walk.arcs) <= max_k:
            out.append((inst, sol.cost, len(sol.walk.arcs)))
    return out


def test_criterion_6_color_coding():
    fixtures = colorcoding_fixtures()
    rand_fail = exh_fail = 0
    for j, (inst, cost, k) in enumerate(fixtures):
        if solve_k_occurrences(inst, k, RANDOMIZED, seed=j, delta=0.01).cost != cost:
            rand_fail += 1
        if solve_k_occurrences(inst, k, EXHAUSTIVE).cost != cost:
            exh_fail += 1
    ks = Counter(k for _, _, k in fixtures)
    ok = rand_fail <= 5 and exh_fail == 0
    record_criterion(6, ok, f"instances={len(fixtures)} k_histogram={dict(sorted(ks.items()))} "
                            f"randomized_failures={rand_fail} exhaustive_failures={exh_fail}")
    assert rand_fail <= 5
    assert exh_fail == 0


def small_cds_instances():
    """Graphs on <= 5 vertices up to isomorphism, capacities in [1, min(deg, 2)], k in {1, 2}."""
    for g in nx.graph_atlas_g()[1:]:
        n = g.number_of_nodes()
        if n > 5:
            break
        edges = sorted((min(u, v), max(u, v)) for u, v in g.edges())
        deg = [g.degree(v) for v in range(n)]
        choices = [range(1, max(1, min(d, 2)) + 1) for d in deg]
        for caps in itertools.product(*choices):
            for k in (1, 2):
                if k <= n:
                    yield CDSInstance(n, edges, dict(enumerate(caps)), k)


def force_gadget_host(p):
    frag = gen_force_gadget(p)
    names = ["h0", "h1"] + frag.vertices
    ids = {v: i for i, v in enumerate(names)}
    arcs = [(ids[a], ids[b], 1, c) for a, b, c in frag.arcs]
    arcs += [(0, 1, 1, None), (1, 0, 1, None), (1, ids["F.u_in"], 1, None), (ids["F.u_out"], 0, 1, None)]
    inst = make_instance(len(names), arcs, [0] + [ids[t] for t in frag.terminals])
    out_arc = next(i for i, a in enumerate(inst.arcs) if (a.tail, a.head) == (ids["F.w"], ids["F.u_out"]))
    return inst, out_arc


def test_criterion_7_hardness_generators():
    total = yes = failures = 0
    for cds in small_cds_instances():
        total += 1
        found, witness = cds_brute_force(cds)
        if not found:
            continue
        yes += 1
        red = build_cds_reduction(cds)
        walk = build_witness_walk(cds, *witness, red=red)
        rep = validate_walk(red.instance, walk)
        expected = 132 * len(cds.edges) + 69 * cds.n + 3 * cds.k + 12
        if not (rep.valid and rep.cost == expected == reduction_budget(cds) == red.instance.budget
                and red.instance.budget == 3 * red.terminals):
            failures += 1
    force_ok = True
    for p in (1, 2):
        inst, out_arc = force_gadget_host(p)
        sol = oracle_solve(inst)
        force_ok &= sol.status is Status.OPTIMAL and Counter(sol.walk.arcs)[out_arc] == p
    ok = failures == 0 and force_ok and yes > 0
    record_criterion(7, ok, f"cds_instances={total} yes_instances={yes} witness_failures={failures} "
                            f"force_gadget_p<=2={'ok' if force_ok else 'broken'}")
    assert failures == 0 and force_ok and yes > 0


def test_criterion_8_bench_determinism(bench):
    _, records, _ = bench
    first = format_report(records, ALGOS)
    buf = io.StringIO()
    with contextlib.redirect_stdout(buf), contextlib.redirect_stderr(io.StringIO()):
        code = main(["bench", "--builtin", "all", "--seed", "0", "--quiet"])
    second = buf.getvalue()
    ok = code == 0 and first == second
    record_criterion(8, ok, f"report_bytes={len(first.encode())} identical={first == second} exit={code}")
    assert code == 0
    assert first == second
