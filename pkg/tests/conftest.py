import itertools
import random

import pytest

from dwrp.core import make_instance


def brute_force_cost(inst):
    """Independent optimum by scanning arc-count vectors; None when infeasible.

    Each arc is used at most min(cap, |W|) times, which is enough for an optimum
    when all weights are positive.
    """
    W = set(inst.waypoints)
    if len(W) <= 1:
        return 0
    bounds = [range(min(inst.cap(i), len(W)) + 1) for i in range(inst.m)]
    best = None
    for x in itertools.product(*bounds):
        bal = [0] * inst.n
        cost = 0
        for c, a in zip(x, inst.arcs):
            bal[a.tail] += c
            bal[a.head] -= c
            cost += c * a.weight
        if any(bal) or (best is not None and cost >= best):
            continue
        support = [a for c, a in zip(x, inst.arcs) if c]
        touched = {a.tail for a in support}
        if not W <= touched:
            continue
        parent = {v: v for v in touched}

        def find(v):
            while parent[v] != v:
                v = parent[v]
            return v

        for a in support:
            parent[find(a.tail)] = find(a.head)
        if len({find(v) for v in touched}) == 1:
            best = cost
    return best


def random_instance(rng, nmax=6, pedge=0.45, pcap=0.4, max_w=9, multi=False):
    n = rng.randint(2, nmax)
    arcs = []
    for u in range(n):
        for v in range(n):
            if u != v and rng.random() < pedge:
                cap = rng.choice([1, 2]) if rng.random() < pcap else None
                arcs.append((u, v, rng.randint(1, max_w), cap))
                if multi and rng.random() < 0.2:
                    arcs.append((u, v, rng.randint(1, max_w), rng.choice([1, None])))
    W = rng.sample(range(n), rng.randint(2, n))
    return make_instance(n, arcs, W, multiarc=multi)


@pytest.fixture
def two_cycle():
    return make_instance(2, [(0, 1, 1, None), (1, 0, 1, None)], [0, 1])


@pytest.fixture
def star():
    arcs = [(0, 1, 1, None), (1, 0, 1, None), (0, 2, 1, None), (2, 0, 1, None)]
    return make_instance(3, arcs, [0, 1, 2])


@pytest.fixture
def triangle():
    return make_instance(3, [(0, 1, 1, None), (1, 2, 1, None), (2, 0, 1, None)], [0, 1, 2])


@pytest.fixture
def rng():
    return random.Random(12345)


# ---------------------------------------------------------------- acceptance summary lines

ACCEPTANCE = {}


def record_criterion(number, ok, detail):
    line = f"CRITERION {number}: {'PASS' if ok else 'FAIL'} {detail}"
    ACCEPTANCE[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
