"""Deterministic instance corpora used by `bench` and the acceptance suite.

Corpus "a": every strongly connected digraph on 2..4 vertices up to isomorphism, every
waypoint set of size >= 2 up to the digraph's automorphisms, and weight/capacity
labelings over {1,2} x {1, unbounded}. All labelings are used when there are at most
`full_labelings` of them; otherwise a seeded sample of that many (always including the
all-(1, unbounded) and all-(1, 1) labelings).

Corpus "b": seeded random instances on 2..7 vertices with a Hamiltonian backbone.
"""
from __future__ import annotations

import itertools
import random
import zlib
from dataclasses import dataclass
from typing import Iterator, List, Tuple

from .core import Instance, make_instance
from .hardness import gen_random

LABELS = [(1, None), (2, None), (1, 1), (2, 1)]


@dataclass(frozen=True)
class CorpusEntry:
    name: str
    instance: Instance


def _strongly_connected(n: int, arcs) -> bool:
    out = [[] for _ in range(n)]
    inn = [[] for _ in range(n)]
    for a, b in arcs:
        out[a].append(b)
        inn[b].append(a)
    for adj in (out, inn):
        seen = {0}
        stack = [0]
        while stack:
            x = stack.pop()
            for y in adj[x]:
                if y not in seen:
                    seen.add(y)
                    stack.append(y)
        if len(seen) != n:
            return False
    return True


def strongly_connected_digraphs(n: int) -> List[Tuple[Tuple[int, int], ...]]:
    """One representative (lexicographically least arc list) per isomorphism class."""
    pairs = [(a, b) for a in range(n) for b in range(n) if a != b]
    perms = list(itertools.permutations(range(n)))
    reps = set()
    for mask in range(1 << len(pairs)):
        arcs = [p for j, p in enumerate(pairs) if mask >> j & 1]
        if len(arcs) < n or not _strongly_connected(n, arcs):
            continue
        canon = min(tuple(sorted((p[a], p[b]) for a, b in arcs)) for p in perms)
        reps.add(canon)
    return sorted(reps, key=lambda r: (len(r), r))


def waypoint_orbits(n: int, arcs) -> List[Tuple[int, ...]]:
    arcset = set(arcs)
    autos = [p for p in itertools.permutations(range(n)) if {(p[a], p[b]) for a, b in arcs} == arcset]
    out = set()
    for size in range(2, n + 1):
        for W in itertools.combinations(range(n), size):
            out.add(min(tuple(sorted(p[w] for w in W)) for p in autos))
    return sorted(out, key=lambda w: (len(w), w))


def corpus_a(max_n: int = 4, full_labelings: int = 16, seed: int = 0) -> Iterator[CorpusEntry]:
    for n in range(2, max_n + 1):
        for gi, arcs in enumerate(strongly_connected_digraphs(n)):
            m = len(arcs)
            for W in waypoint_orbits(n, arcs):
                tag = f"a-n{n}-g{gi}-W{''.join(map(str, W))}"
                total = len(LABELS) ** m
                if total <= full_labelings:
                    labelings = itertools.product(range(len(LABELS)), repeat=m)
                else:
                    rng = random.Random(zlib.crc32(f"{seed}:{tag}".encode()))
                    picks = {(0,) * m, (2,) * m}
                    while len(picks) < full_labelings:
                        picks.add(tuple(rng.randrange(len(LABELS)) for _ in range(m)))
                    labelings = sorted(picks)
                for lab in labelings:
                    labeled = [(a, b, LABELS[j][0], LABELS[j][1]) for (a, b), j in zip(arcs, lab)]
                    name = f"{tag}-L{''.join(map(str, lab))}"
                    yield CorpusEntry(name, make_instance(n, labeled, W))


def corpus_b(count: int = 200, seed: int = 0, max_n: int = 7) -> Iterator[CorpusEntry]:
    rng = random.Random(seed)
    for i in range(count):
        n = rng.randint(2, max_n)
        density = rng.choice([0.15, 0.25, 0.4])
        k = rng.randint(2, n)
        inst = gen_random(n, density=density, weights=(1, 9), capacities=(1, 2),
                          unbounded_prob=0.8, waypoints=k, seed=rng.randrange(2 ** 31))
        yield CorpusEntry(f"b-{i:03d}-n{n}", inst)


def builtin(which: str = "all", seed: int = 0, b_count: int = 200) -> List[CorpusEntry]:
    out: List[CorpusEntry] = []
    if which in ("a", "all"):
        out.extend(corpus_a(seed=seed))
    if which in ("b", "all"):
        out.extend(corpus_b(b_count, seed=seed))
    return out


def load_dir(path: str) -> List[CorpusEntry]:
    import os

    from .core import parse_instance

    out = []
    for fn in sorted(os.listdir(path)):
        if fn.endswith(".dwrp"):
            with open(os.path.join(path, fn), encoding="utf-8") as fh:
                out.append(CorpusEntry(fn[:-5], parse_instance(fh.read())))
    return out


def count(which: str = "all", seed: int = 0) -> int:
    return len(builtin(which, seed))


__all__ = ["CorpusEntry", "builtin", "corpus_a", "corpus_b", "count", "load_dir",
           "strongly_connected_digraphs", "waypoint_orbits"]
