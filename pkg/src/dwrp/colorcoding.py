"""Color coding for solutions with at most k arc occurrences.

Every arc e is expanded into min(cap(e), k) unit copies. Under a coloring of the copies
with k colors, the DP T[W', C, v] holds the cheapest walk from w0 to v that visits at
least W' (a subset of W - {w0}) and uses exactly one copy of each color in C. A closed
walk with at most k occurrences is found whenever its copies are colored injectively.

Two families are offered:
  * randomized: ceil(e^k ln(1/delta)) independent uniform colorings;
  * exhaustive: every coloring up to two symmetries that cannot change the DP value,
    namely permuting the colors, and permuting the colors among the copies of one arc.
    So it suffices to give each arc a set of min(cap, k) distinct colors, enumerated
    up to a global relabeling of colors. When that family is too large, a k-perfect
    family is used instead: seeded colorings are added greedily until every k-subset
    of copies is colored injectively by some member, which is checked explicitly.
The literal k^m family is still available from `coloring_family` for tiny m.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .core import ClosedWalk, Instance, TooLarge, metric_closure
from .oracle import Solution, finish, infeasible, trivial_solution

EXHAUSTIVE = "exhaustive"
RANDOMIZED = "randomized"
DEFAULT_FAMILY_LIMIT = 200_000
DEFAULT_SUBSET_LIMIT = 2_000_000
DEFAULT_CELL_LIMIT = 60_000_000
BATCH_FLOATS = 6_000_000


@dataclass(frozen=True)
class UnitMultigraph:
    n: int
    k: int
    occurrences: Tuple[Tuple[int, int, int], ...]  # (tail, head, weight), capacity 1 each
    origin: Tuple[int, ...]                         # occurrence -> original arc index


def expand_to_unit_multigraph(inst: Instance, k: int, keep=None) -> UnitMultigraph:
    """`keep` optionally restricts the expansion to a subset of arc indices."""
    if k < 1:
        raise ValueError("k must be at least 1")
    occ, origin = [], []
    for i, a in enumerate(inst.arcs):
        if keep is not None and i not in keep:
            continue
        for _ in range(min(inst.cap(i) if a.capacity is not None else k, k)):
            occ.append((a.tail, a.head, a.weight))
            origin.append(i)
    return UnitMultigraph(inst.n, k, tuple(occ), tuple(origin))


@dataclass
class ColoringFamily:
    colorings: np.ndarray  # shape (t, m), entries in range(k)
    mode: str
    seed: Optional[int] = None

    def __len__(self) -> int:
        return self.colorings.shape[0]


def randomized_repeats(k: int, delta: float) -> int:
    return math.ceil(math.exp(k) * math.log(1.0 / delta))


def coloring_family(m: int, k: int, mode: str = EXHAUSTIVE, seed: int = 0, delta: float = 0.01,
                    limit: int = DEFAULT_FAMILY_LIMIT) -> ColoringFamily:
    if m < 1 or k < 1:
        raise ValueError("m and k must be positive")
    if mode == EXHAUSTIVE:
        if m * math.log(k) > math.log(limit):
            raise TooLarge(f"{k}^{m} colorings exceed the limit {limit}")
        cols = np.array(list(itertools.product(range(k), repeat=m)), dtype=np.int64).reshape(-1, m)
        return ColoringFamily(cols, mode)
    if mode == RANDOMIZED:
        t = randomized_repeats(k, delta)
        rng = np.random.default_rng(seed)
        return ColoringFamily(rng.integers(0, k, size=(t, m)), mode, seed)
    raise ValueError(f"unknown mode {mode}")


def canonical_family(umg: UnitMultigraph, limit: int = DEFAULT_FAMILY_LIMIT) -> ColoringFamily:
    """Exhaustive family up to color relabeling, copies of an arc get distinct colors."""
    k = umg.k
    groups: List[List[int]] = []
    for j, o in enumerate(umg.origin):
        if groups and umg.origin[groups[-1][0]] == o:
            groups[-1].append(j)
        else:
            groups.append([j])
    tight = [g for g in groups if len(g) < k]
    full = [g for g in groups if len(g) == k]
    base = np.zeros(len(umg.origin), dtype=np.int64)
    for g in full:
        base[g] = np.arange(k)
    rows: List[np.ndarray] = []

    def rec(idx: int, used: int, cur: np.ndarray) -> None:
        if len(rows) > limit:
            raise TooLarge(f"canonical coloring family exceeds {limit}")
        if idx == len(tight):
            rows.append(cur.copy())
            return
        g = tight[idx]
        c = len(g)
        for fresh in range(min(c, k - used), -1, -1):
            for old in itertools.combinations(range(used), c - fresh):
                colors = list(old) + list(range(used, used + fresh))
                cur[g] = colors
                rec(idx + 1, used + fresh, cur)

    rec(0, 0, base.copy())
    return ColoringFamily(np.array(rows, dtype=np.int64).reshape(len(rows), -1), EXHAUSTIVE)


def perfect_family(m: int, k: int, seed: int = 0, limit: int = DEFAULT_FAMILY_LIMIT,
                   subset_limit: int = DEFAULT_SUBSET_LIMIT, batch: int = 32) -> ColoringFamily:
    """Colorings of m copies such that every min(k, m)-subset is injective under one of them."""
    if m < 1 or k < 1:
        raise ValueError("m and k must be positive")
    r = min(k, m)
    if math.comb(m, r) > subset_limit:
        raise TooLarge(f"{math.comb(m, r)} subsets of size {r} exceed {subset_limit}")
    if r == m:
        return ColoringFamily(np.arange(m, dtype=np.int64).reshape(1, m), EXHAUSTIVE, seed)
    todo = np.array(list(itertools.combinations(range(m), r)), dtype=np.int64)
    rng = np.random.default_rng(seed)
    popcount = np.array([bin(b).count("1") for b in range(1 << k)])
    rows: List[np.ndarray] = []
    while len(todo):
        if len(rows) >= limit:
            raise TooLarge(f"perfect coloring family exceeds {limit}")
        cand = rng.integers(0, k, size=(batch, m))
        bits = np.bitwise_or.reduce(np.left_shift(1, cand[:, todo]), axis=2)
        ok = popcount[bits] == r
        best = int(np.argmax(ok.sum(axis=1)))
        if ok[best].any():
            rows.append(cand[best])
            todo = todo[~ok[best]]
    return ColoringFamily(np.array(rows, dtype=np.int64), EXHAUSTIVE, seed)


def exhaustive_family(umg: UnitMultigraph, seed: int = 0,
                      limit: int = DEFAULT_FAMILY_LIMIT) -> ColoringFamily:
    try:
        return canonical_family(umg, limit)
    except TooLarge:
        return perfect_family(len(umg.occurrences), umg.k, seed, limit)


class ColorfulDP:
    """Vectorized evaluation of T over a batch of colorings."""

    def __init__(self, inst: Instance, umg: UnitMultigraph, w0: int):
        self.inst = inst
        self.umg = umg
        self.k = umg.k
        self.w0 = w0
        rest = sorted(inst.waypoints - {w0})
        self.bit = {v: 1 << j for j, v in enumerate(rest)}
        self.full = (1 << len(rest)) - 1
        nw = 1 << len(rest)
        self.nw = nw
        self.idx = {}
        for v in range(inst.n):
            b = self.bit.get(v, 0)
            self.idx[v] = np.array([s & ~b for s in range(nw)], dtype=np.int64)
        arcs = sorted(set(umg.origin))
        self.arcs = arcs
        self.arc_pos = {a: j for j, a in enumerate(arcs)}
        k = self.k
        self.layer_masks = {}
        for L in range(1, k + 1):
            for c in range(k):
                ms = [C for C in range(1 << k) if bin(C).count("1") == L and C >> c & 1]
                ms = np.array(ms, dtype=np.int64)
                self.layer_masks[(L, c)] = (ms, ms ^ (1 << c))

    def avail(self, colorings: np.ndarray) -> np.ndarray:
        """avail[b, j, c]: coloring b gives some copy of arc self.arcs[j] color c."""
        B = colorings.shape[0]
        out = np.zeros((B, len(self.arcs), self.k), dtype=bool)
        pos = np.array([self.arc_pos[o] for o in self.umg.origin], dtype=np.int64)
        for occ in range(colorings.shape[1]):
            out[np.arange(B), pos[occ], colorings[:, occ]] = True
        return out

    def table(self, avail: np.ndarray) -> np.ndarray:
        B = avail.shape[0]
        k, n = self.k, self.inst.n
        # layout (vertex, coloring, color set, waypoint set)
        # float32 is exact for the integer costs met here (below 2^24)
        T = np.full((n, B, 1 << k, self.nw), np.inf, dtype=np.float32)
        T[self.w0, :, 0, 0] = 0.0
        inst = self.inst
        any_c = avail.any(axis=0)
        all_c = avail.all(axis=0)
        for L in range(1, k + 1):
            for j, e in enumerate(self.arcs):
                a = inst.arcs[e]
                u, v, w = a.tail, a.head, np.float32(a.weight)
                iv = self.idx[v][None, :]
                Tu, Tv = T[u], T[v]
                for c in range(k):
                    if not any_c[j, c]:
                        continue
                    Cs, prevCs = self.layer_masks[(L, c)]
                    prev = Tu[:, prevCs[:, None], iv] + w
                    if not all_c[j, c]:
                        prev[~avail[:, j, c]] = np.inf
                    Tv[:, Cs] = np.minimum(Tv[:, Cs], prev)
        return T

    def answers(self, T: np.ndarray) -> np.ndarray:
        return T[self.w0][:, :, self.full].min(axis=1)

    def walk(self, T1: np.ndarray, avail1: np.ndarray) -> List[int]:
        """Back-track one optimal colorful walk from a single-coloring table."""
        T = T1[:, 0]
        inst = self.inst
        col = T[self.w0, :, self.full]
        C = int(np.argmin(col))
        val = col[C]
        v, Wm = self.w0, self.full
        arcs: List[int] = []
        while C:
            found = False
            for j, e in enumerate(self.arcs):
                a = inst.arcs[e]
                if a.head != v:
                    continue
                for c in range(self.k):
                    if not (C >> c & 1) or not avail1[0, j, c]:
                        continue
                    pw = Wm & ~self.bit.get(v, 0)
                    pv = T[a.tail, C ^ (1 << c), pw]
                    if pv + a.weight == val:
                        arcs.append(e)
                        C ^= 1 << c
                        Wm, v, val = pw, a.tail, pv
                        found = True
                        break
                if found:
                    break
            if not found:
                raise AssertionError("back-tracking failed")
        arcs.reverse()
        return arcs


def solve_colorful(umg: UnitMultigraph, w0: int, coloring, inst: Instance) -> float:
    """Cheapest colorful closed walk from w0 visiting all waypoints under one coloring."""
    coloring = np.asarray(coloring, dtype=np.int64).reshape(1, -1)
    if coloring.shape[1] != len(umg.occurrences):
        raise ValueError("coloring must color every occurrence")
    dp = ColorfulDP(inst, umg, w0)
    av = dp.avail(coloring)
    return float(dp.answers(dp.table(av))[0])


def _hops(inst: Instance, src: int, reverse: bool) -> List[float]:
    adj: List[List[int]] = [[] for _ in range(inst.n)]
    for a in inst.arcs:
        if reverse:
            adj[a.head].append(a.tail)
        else:
            adj[a.tail].append(a.head)
    dist = [math.inf] * inst.n
    dist[src] = 0
    queue = [src]
    for x in queue:
        for y in adj[x]:
            if dist[y] == math.inf:
                dist[y] = dist[x] + 1
                queue.append(y)
    return dist


def useful_arcs(inst: Instance, w0: int, k: int) -> set:
    """Arcs lying on some closed walk through w0 with at most k occurrences."""
    fwd = _hops(inst, w0, False)
    back = _hops(inst, w0, True)
    return {i for i, a in enumerate(inst.arcs) if fwd[a.tail] + 1 + back[a.head] <= k}


def _evaluate(inst: Instance, umg: UnitMultigraph, w0: int, fam: ColoringFamily, cells: int):
    """Best value over a family, with the DP object and availability of the best coloring."""
    dp = ColorfulDP(inst, umg, w0)
    batch = max(1, BATCH_FLOATS // cells)
    best, best_b = np.inf, -1
    for start in range(0, len(fam), batch):
        cols = fam.colorings[start:start + batch]
        ans = dp.answers(dp.table(dp.avail(cols)))
        b = int(np.argmin(ans))
        if ans[b] < best:
            best, best_b = float(ans[b]), start + b
    if best_b < 0:
        return best, dp, None
    return best, dp, dp.avail(fam.colorings[best_b:best_b + 1])


def arcs_within(inst: Instance, keep: set, ub: float) -> set:
    """Arcs of `keep` lying on some closed walk that covers W with cost <= ub.

    Per arc, a Held-Karp bound over W plus the arc as an extra stop (capacities ignored,
    so it is a lower bound on any real solution through the arc).
    """
    dm = metric_closure(inst)
    ws = sorted(inst.waypoints)
    w0, rest = ws[0], ws[1:]
    r = len(rest)
    out = set()
    for i in sorted(keep):
        a = inst.arcs[i]
        # stops: rest waypoints plus the arc; the arc is entered at its tail and left at its head
        def d(x, y):
            xs = a.head if x == -1 else x
            yt = a.tail if y == -1 else y
            return dm(xs, yt) + (a.weight if y == -1 else 0)
        nodes = rest + [-1]
        full = (1 << (r + 1)) - 1
        dp = [[math.inf] * (r + 1) for _ in range(full + 1)]
        for j, x in enumerate(nodes):
            dp[1 << j][j] = d(w0, x)
        for mask in range(1, full + 1):
            for j in range(r + 1):
                cur = dp[mask][j]
                if cur == math.inf or not mask >> j & 1:
                    continue
                for t in range(r + 1):
                    if not mask >> t & 1:
                        nv = cur + d(nodes[j], nodes[t])
                        if nv < dp[mask | 1 << t][t]:
                            dp[mask | 1 << t][t] = nv
        lb = min(dp[full][j] + d(nodes[j], w0) for j in range(r + 1))
        if lb <= ub:
            out.add(i)
    return out


def solve_k_occurrences(inst: Instance, k: int, mode: str = EXHAUSTIVE, seed: int = 0,
                        delta: float = 0.01, family_limit: int = DEFAULT_FAMILY_LIMIT,
                        cell_limit: int = DEFAULT_CELL_LIMIT, probe: int = 32) -> Solution:
    """Cheapest solution with at most k arc occurrences.

    In exhaustive mode a few seeded random colorings first give an upper bound UB; arcs
    that cannot lie on a closed walk through w0 of cost <= UB are dropped before the
    exhaustive family is built. The optimum only uses arcs that pass this test, so the
    result is unchanged while the family shrinks.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    W = inst.waypoints
    if len(W) <= 1:
        return trivial_solution(inst)
    if len(W) > k:
        return infeasible(method="colorcoding", reason="more waypoints than occurrences")
    w0 = min(W)
    cells = (1 << k) * (1 << (len(W) - 1)) * inst.n
    if cells > cell_limit:
        raise TooLarge(f"DP table of {cells} cells exceeds {cell_limit}")
    keep = useful_arcs(inst, w0, k)
    umg = expand_to_unit_multigraph(inst, k, keep)
    stats = {"method": "colorcoding", "mode": mode, "k": k}
    if not umg.occurrences:
        return infeasible(**stats)
    if mode == EXHAUSTIVE:
        pfam = coloring_family(len(umg.occurrences), k, RANDOMIZED, seed=seed, delta=0.5)
        pfam.colorings = pfam.colorings[:probe]
        best, dp, av = _evaluate(inst, umg, w0, pfam, cells)
        if best < np.inf:
            keep = arcs_within(inst, keep, best)
            umg = expand_to_unit_multigraph(inst, k, keep)
        fam = exhaustive_family(umg, seed, family_limit)
        value, dp2, av2 = _evaluate(inst, umg, w0, fam, cells)
        if value <= best:
            best, dp, av = value, dp2, av2
        stats["colorings"] = len(fam) + len(pfam)
    else:
        fam = coloring_family(len(umg.occurrences), k, RANDOMIZED, seed, delta)
        best, dp, av = _evaluate(inst, umg, w0, fam, cells)
        stats["colorings"] = len(fam)
    if best == np.inf:
        return infeasible(**stats)
    arcs = dp.walk(dp.table(av), av)
    walk = ClosedWalk(tuple(arcs))
    usage = walk.multiset()
    assert all(c <= inst.cap(i) for i, c in usage.items())
    return finish(inst, walk, int(best), **stats)
