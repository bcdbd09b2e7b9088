"""Dynamic program over a nice tree decomposition with a per-vertex visit bound.

A table entry at node x is keyed by a partition of the bag (stored as a restricted
growth string over the sorted bag), and the in/out arc counts of every bag vertex.
The value is the cheapest partial solution in the subgraph introduced below x that is
compatible with the key.
"""
from __future__ import annotations

from collections import defaultdict
from typing import Dict, List, Optional, Tuple

from .core import Instance, TooLarge, multiset_to_walk
from .oracle import Solution, finish, infeasible, trivial_solution
from .structparams import (FORGET, INTRO_EDGE, INTRO_VERTEX, JOIN, LEAF, NiceTreeDecomposition,
                           UnderlyingGraph, exact_tree_decomposition, make_nice)

DEFAULT_TABLE_LIMIT = 3_000_000

Key = Tuple[Tuple[int, ...], Tuple[int, ...], Tuple[int, ...]]


def normalize(labels) -> Tuple[int, ...]:
    remap: Dict[int, int] = {}
    out = []
    for x in labels:
        if x not in remap:
            remap[x] = len(remap)
        out.append(remap[x])
    return tuple(out)


def coarsen(a: Tuple[int, ...], b: Tuple[int, ...]) -> Tuple[int, ...]:
    """Finest common coarsening of two partitions of the same bag."""
    size = len(a)
    parent = list(range(size))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for lab in (a, b):
        first: Dict[int, int] = {}
        for i, x in enumerate(lab):
            if x in first:
                parent[find(i)] = find(first[x])
            else:
                first[x] = i
    return normalize(find(i) for i in range(size))


class TWDP:
    def __init__(self, inst: Instance, ntd: NiceTreeDecomposition, nu: int,
                 ub: Optional[int] = None, table_limit: int = DEFAULT_TABLE_LIMIT):
        self.inst = inst
        self.ntd = ntd
        self.nu = nu
        self.ub = ub
        self.table_limit = table_limit
        self.groups: Dict[Tuple[int, int], List[int]] = defaultdict(list)
        for i, a in enumerate(inst.arcs):
            self.groups[(min(a.tail, a.head), max(a.tail, a.head))].append(i)
        self.tables: Dict[int, Dict[Key, Tuple[int, object]]] = {}
        self.bags = [tuple(sorted(x.bag)) for x in ntd.nodes]

    def _store(self, table, key, cost, back) -> None:
        if self.ub is not None and cost > self.ub:
            return
        old = table.get(key)
        if old is None or cost < old[0]:
            table[key] = (cost, back)

    def run(self) -> Dict[Key, Tuple[int, object]]:
        for x in self.ntd.postorder():
            node = self.ntd.nodes[x]
            kind = node.kind
            if kind == LEAF:
                t = {((), (), ()): (0, None)}
            elif kind == INTRO_VERTEX:
                t = self._introduce_vertex(x)
            elif kind == INTRO_EDGE:
                t = self._introduce_edge(x)
            elif kind == FORGET:
                t = self._forget(x)
            elif kind == JOIN:
                t = self._join(x)
            else:
                raise ValueError(kind)
            if len(t) > self.table_limit:
                raise TooLarge(f"table at node {x} has {len(t)} entries")
            self.tables[x] = t
        return self.tables[self.ntd.root]

    def _introduce_vertex(self, x: int):
        node = self.ntd.nodes[x]
        c = node.children[0]
        p = self.bags[x].index(node.vertex)
        t: Dict[Key, Tuple[int, object]] = {}
        for key, (cost, _) in self.tables[c].items():
            lab, ins, outs = key
            nl = normalize(lab[:p] + (len(lab),) + lab[p:])
            nk = (nl, ins[:p] + (0,) + ins[p:], outs[:p] + (0,) + outs[p:])
            self._store(t, nk, cost, key)
        return t

    def _introduce_edge(self, x: int):
        node = self.ntd.nodes[x]
        c = node.children[0]
        bag = self.bags[x]
        u, v = node.edge
        pu, pv = bag.index(u), bag.index(v)
        arcs = []
        for i in self.groups[(u, v)]:
            a = self.inst.arcs[i]
            arcs.append((i, bag.index(a.tail), bag.index(a.head), min(self.inst.cap(i), self.nu), a.weight))
        nu = self.nu
        t: Dict[Key, Tuple[int, object]] = {}
        for key, (cost, _) in self.tables[c].items():
            lab, ins, outs = key
            ins_l, outs_l = list(ins), list(outs)
            chosen = [0] * len(arcs)

            def rec(j: int, cst: int, used: int) -> None:
                if j == len(arcs):
                    nl = lab
                    if used and lab[pu] != lab[pv]:
                        a_, b_ = lab[pu], lab[pv]
                        nl = normalize(a_ if y == b_ else y for y in lab)
                    self._store(t, (nl, tuple(ins_l), tuple(outs_l)), cst, (key, tuple(chosen)))
                    return
                i, tp, hp, cap, w = arcs[j]
                top = min(cap, nu - outs_l[tp], nu - ins_l[hp])
                for b in range(top + 1):
                    # guessed count never exceeds capacity or the remaining visit budget
                    assert b <= cap and outs_l[tp] + b <= nu and ins_l[hp] + b <= nu
                    chosen[j] = b
                    outs_l[tp] += b
                    ins_l[hp] += b
                    rec(j + 1, cst + b * w, used + b)
                    outs_l[tp] -= b
                    ins_l[hp] -= b
                chosen[j] = 0

            rec(0, cost, 0)
        return t

    def _forget(self, x: int):
        node = self.ntd.nodes[x]
        c = node.children[0]
        v = node.vertex
        p = self.bags[c].index(v)
        is_wp = v in self.inst.waypoints
        t: Dict[Key, Tuple[int, object]] = {}
        for key, (cost, _) in self.tables[c].items():
            lab, ins, outs = key
            i = ins[p]
            if i != outs[p]:
                continue
            shared = lab.count(lab[p]) > 1
            if i == 0:
                if is_wp or shared:
                    continue
            elif not shared:
                continue
            nk = (normalize(lab[:p] + lab[p + 1:]), ins[:p] + ins[p + 1:], outs[:p] + outs[p + 1:])
            self._store(t, nk, cost, key)
        return t

    def _join(self, x: int):
        node = self.ntd.nodes[x]
        cy, cz = node.children
        nu = self.nu
        ub = self.ub
        ty, tz = self.tables[cy], self.tables[cz]
        t: Dict[Key, Tuple[int, object]] = {}
        zitems = sorted(tz.items(), key=lambda kv: kv[1][0])
        for ky, (costy, _) in ty.items():
            ly, iy, oy = ky
            for kz, (costz, _) in zitems:
                total = costy + costz
                if ub is not None and total > ub:
                    break
                lz, iz, oz = kz
                ins = tuple(a + b for a, b in zip(iy, iz))
                if max(ins, default=0) > nu:
                    continue
                outs = tuple(a + b for a, b in zip(oy, oz))
                if max(outs, default=0) > nu:
                    continue
                self._store(t, (coarsen(ly, lz), ins, outs), total, (ky, kz))
        return t

    def root_answer(self) -> Tuple[Optional[int], Optional[Key]]:
        root = self.tables[self.ntd.root]
        best, arg = None, None
        for i in range(1, self.nu + 1):
            e = root.get(((0,), (i,), (i,)))
            if e is not None and (best is None or e[0] < best):
                best, arg = e[0], ((0,), (i,), (i,))
        return best, arg

    def multiplicities(self, key: Key) -> Dict[int, int]:
        ms: Dict[int, int] = defaultdict(int)
        stack = [(self.ntd.root, key)]
        while stack:
            x, k = stack.pop()
            node = self.ntd.nodes[x]
            back = self.tables[x][k][1]
            if node.kind == LEAF:
                continue
            if node.kind == INTRO_EDGE:
                ck, chosen = back
                for i, b in zip(self.groups[node.edge], chosen):
                    if b:
                        ms[i] += b
                stack.append((node.children[0], ck))
            elif node.kind == JOIN:
                stack.append((node.children[0], back[0]))
                stack.append((node.children[1], back[1]))
            else:
                stack.append((node.children[0], back))
        return dict(ms)


def build_decomposition(inst: Instance, anchor: int) -> NiceTreeDecomposition:
    g = UnderlyingGraph.from_instance(inst)
    td, _ = exact_tree_decomposition(g)
    return make_nice(td, anchor, g)


def solve_twdp(inst: Instance, nu: Optional[int] = None, ub: Optional[int] = None,
               ntd: Optional[NiceTreeDecomposition] = None, deepen: bool = True,
               table_limit: int = DEFAULT_TABLE_LIMIT) -> Solution:
    """Minimum closed walk with every vertex visited at most nu times (nu=None means |W|).

    `ub` drops partial solutions costlier than a known feasible cost; this never changes
    the optimum as long as ub is at least the optimum. With `deepen`, the bounds
    1, 2, ..., nu are solved in turn and each optimum is the next run's ub (the optimum
    is nonincreasing in nu, so the bound stays valid).
    """
    W = inst.waypoints
    if len(W) <= 1:
        return trivial_solution(inst)
    if nu is None:
        nu = len(W)
    if nu < 1:
        raise ValueError("nu must be at least 1")
    w0 = min(W)
    if ntd is None:
        ntd = build_decomposition(inst, w0)
    entries = 0
    for cur in (range(1, nu + 1) if deepen else [nu]):
        dp = TWDP(inst, ntd, cur, ub, table_limit)
        root = dp.run()
        best, key = dp.root_answer()
        entries += sum(len(t) for t in dp.tables.values())
        if best is not None:
            ub = best
    stats = {"method": "twdp", "nu": nu, "width": ntd.width,
             "root_table": {k: v[0] for k, v in root.items()}, "table_entries": entries}
    if best is None:
        return infeasible(**stats)
    ms = dp.multiplicities(key)
    walk = multiset_to_walk(inst, ms, w0)
    return finish(inst, walk, best, **stats)
