"""Solver parameterized by the feedback edge number of the underlying graph.

Outline: strip degree-one vertices, split the remaining graph into paths between
the vertex set X (endpoints of feedback edges plus branching vertices), classify how
an optimal walk can use each path, and solve a small compressed instance per
classification with the exact oracle.

Paths without internal waypoints are not branched on. The four classifications
available to them (pass either way, both, or unused) are exactly the choices an
exact solver makes when the path is offered as plain arcs u->v and v->u with the
pass costs, so they are compiled that way.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .core import INF, Arc, ClosedWalk, Instance
from .oracle import Solution, Status, finish, infeasible, oracle_solve
from .structparams import UnderlyingGraph, feedback_edge_set

PASS_UV = "u>v"      # every visit is a pass from u to v
PASS_VU = "v>u"
PASS_BOTH = "u<>v"
LOOP_U = "u-loop"    # one visit starting and ending in u
LOOP_V = "v-loop"
LOOP_BOTH = "uv-loops"
UNUSED = "unused"
FREE = "free"        # no internal waypoint: offered as plain arcs, the solver decides

TYPES = (PASS_UV, PASS_VU, PASS_BOTH, LOOP_U, LOOP_V, LOOP_BOTH, UNUSED)


@dataclass
class ReducedInstance:
    inst: Instance
    alive: frozenset
    arcs: Tuple[int, ...]
    waypoints: frozenset
    decrement: int
    pendants: List[Tuple[int, int, int, int]]  # (v, u, arc u->v, arc v->u) in removal order

    def underlying(self) -> UnderlyingGraph:
        return UnderlyingGraph.of(self.inst.n, ((self.inst.arcs[i].tail, self.inst.arcs[i].head) for i in self.arcs))


def apply_degree_one_reductions(inst: Instance) -> Optional[ReducedInstance]:
    """Exhaustively remove degree-one vertices; None means the instance is infeasible."""
    arcs_alive = set(range(inst.m))
    nbr_arcs: Dict[int, Dict[int, List[int]]] = {v: {} for v in range(inst.n)}
    for i, a in enumerate(inst.arcs):
        nbr_arcs[a.tail].setdefault(a.head, []).append(i)
        nbr_arcs[a.head].setdefault(a.tail, []).append(i)
    W = set(inst.waypoints)
    alive = set(range(inst.n))
    decrement = 0
    pendants = []
    changed = True
    while changed:
        changed = False
        for v in sorted(alive):
            if len(nbr_arcs[v]) != 1:
                continue
            (u, arcs), = nbr_arcs[v].items()
            if v in W:
                if len(W) == 1:
                    continue
                uv = [i for i in arcs if inst.arcs[i].tail == u]
                vu = [i for i in arcs if inst.arcs[i].tail == v]
                if not uv or not vu:
                    return None
                a_uv = min(uv, key=lambda i: (inst.arcs[i].weight, i))
                a_vu = min(vu, key=lambda i: (inst.arcs[i].weight, i))
                decrement += inst.arcs[a_uv].weight + inst.arcs[a_vu].weight
                pendants.append((v, u, a_uv, a_vu))
                W.discard(v)
                W.add(u)
            for i in arcs:
                arcs_alive.discard(i)
            del nbr_arcs[u][v]
            nbr_arcs[v] = {}
            alive.discard(v)
            changed = True
    return ReducedInstance(inst, frozenset(alive), tuple(sorted(arcs_alive)), frozenset(W), decrement, pendants)


@dataclass
class PathCatalog:
    X: frozenset
    paths: List[Tuple[int, ...]]  # vertex sequences; length-1 paths include the feedback edges
    k: int


def decompose_paths(r: ReducedInstance, F) -> PathCatalog:
    g = r.underlying()
    F = {(min(u, v), max(u, v)) for u, v in F}
    forest_adj: Dict[int, List[int]] = {v: [] for v in range(g.n)}
    for u, v in sorted(g.edges - F):
        forest_adj[u].append(v)
        forest_adj[v].append(u)
    R = {x for e in F for x in e}
    D = {v for v in range(g.n) if len(forest_adj[v]) >= 3}
    X = frozenset(R | D)
    paths: List[Tuple[int, ...]] = []
    seen = set()
    for x in sorted(X):
        for y in sorted(forest_adj[x]):
            seq = [x, y]
            while seq[-1] not in X:
                cur, prev = seq[-1], seq[-2]
                nxt = [z for z in forest_adj[cur] if z != prev]
                seq.append(nxt[0])
            key = frozenset((min(a, b), max(a, b)) for a, b in zip(seq, seq[1:]))
            if key in seen:
                continue
            seen.add(key)
            if seq[0] > seq[-1]:
                seq.reverse()
            paths.append(tuple(seq))
    for u, v in sorted(F):
        paths.append((u, v))
    return PathCatalog(X, paths, len(F))


@dataclass
class TypeCostTable:
    path: Tuple[int, ...]
    internal_waypoints: Tuple[int, ...]                # positions along the path
    tiers: Dict[str, List[Tuple[int, Optional[int]]]]  # direction -> [(pass cost, count)]
    cost: Dict[str, float]
    loop_arcs: Dict[str, List[int]] = field(default_factory=dict)
    edge_arcs: Dict[str, List[List[int]]] = field(default_factory=dict)

    @property
    def pass_capacity(self) -> Dict[str, Optional[int]]:
        out = {}
        for d, ts in self.tiers.items():
            out[d] = None if any(c is None for _, c in ts) else sum(c for _, c in ts)
        return out


def _edge_arcs(r: ReducedInstance, seq: Sequence[int]) -> List[List[int]]:
    alive = set(r.arcs)
    by_pair: Dict[Tuple[int, int], List[int]] = {}
    for i in r.arcs:
        a = r.inst.arcs[i]
        by_pair.setdefault((a.tail, a.head), []).append(i)
    out = []
    for a, b in zip(seq, seq[1:]):
        lst = [i for i in by_pair.get((a, b), []) if i in alive]
        lst.sort(key=lambda i: (r.inst.arcs[i].weight, i))
        out.append(lst)
    return out


def _tiers(inst: Instance, edges: List[List[int]]) -> List[Tuple[int, Optional[int]]]:
    """Marginal pass costs: the j-th pass uses the j-th cheapest unit on every edge."""
    if any(not lst for lst in edges):
        return []
    ptr = [0] * len(edges)
    left = [inst.arcs[lst[0]].capacity for lst in edges]
    tiers: List[Tuple[int, Optional[int]]] = []
    while True:
        cost = sum(inst.arcs[lst[p]].weight for lst, p in zip(edges, ptr))
        finite = [c for c in left if c is not None]
        count = min(finite) if finite else None
        if tiers and tiers[-1][0] == cost and tiers[-1][1] is not None and count is not None:
            tiers[-1] = (cost, tiers[-1][1] + count)
        else:
            tiers.append((cost, count))
        if count is None:
            return tiers
        for j, lst in enumerate(edges):
            if left[j] is None:
                continue
            left[j] -= count
            if left[j] == 0:
                ptr[j] += 1
                if ptr[j] == len(lst):
                    return tiers
                left[j] = inst.arcs[lst[ptr[j]]].capacity


def path_type_costs(r: ReducedInstance, seq: Sequence[int]) -> TypeCostTable:
    seq = tuple(seq)
    inst = r.inst
    fwd = _edge_arcs(r, seq)
    bwd_rev = _edge_arcs(r, seq[::-1])
    bwd = bwd_rev[::-1]                  # bwd[i]: arcs seq[i+1] -> seq[i]
    L = len(seq) - 1
    wint = tuple(i for i in range(1, L) if seq[i] in r.waypoints)
    tiers = {PASS_UV: _tiers(inst, fwd), PASS_VU: _tiers(inst, bwd_rev)}
    cost: Dict[str, float] = {}
    cost[PASS_UV] = tiers[PASS_UV][0][0] if tiers[PASS_UV] else INF
    cost[PASS_VU] = tiers[PASS_VU][0][0] if tiers[PASS_VU] else INF
    cost[PASS_BOTH] = cost[PASS_UV] + cost[PASS_VU]
    both = [inst.arcs[f[0]].weight + inst.arcs[b[0]].weight if f and b else INF for f, b in zip(fwd, bwd)]

    def from_u(j):  # out and back from u to position j
        return sum(both[:j])

    def from_v(j):
        return sum(both[j:])

    def arcs_from_u(j):
        return [fwd[i][0] for i in range(j)] + [bwd[i][0] for i in reversed(range(j))]

    def arcs_from_v(j):
        return [bwd[i][0] for i in reversed(range(j, L))] + [fwd[i][0] for i in range(j, L)]

    loop_arcs: Dict[str, List[int]] = {}
    if wint:
        cost[LOOP_U] = from_u(wint[-1])
        cost[LOOP_V] = from_v(wint[0])
        if cost[LOOP_U] < INF:
            loop_arcs[LOOP_U] = arcs_from_u(wint[-1])
        if cost[LOOP_V] < INF:
            loop_arcs[LOOP_V] = arcs_from_v(wint[0])
        best, arg = INF, None
        for t in range(len(wint) - 1):
            c = from_u(wint[t]) + from_v(wint[t + 1])
            if c < best:
                best, arg = c, t
        cost[LOOP_BOTH] = best
        if arg is not None:
            loop_arcs[LOOP_BOTH] = arcs_from_u(wint[arg]) + arcs_from_v(wint[arg + 1])
        cost[UNUSED] = INF
    else:
        cost[LOOP_U] = cost[LOOP_V] = cost[LOOP_BOTH] = INF
        cost[UNUSED] = 0
    return TypeCostTable(seq, wint, tiers, cost, loop_arcs, {PASS_UV: fwd, PASS_VU: bwd_rev})


@dataclass
class CompressedInstance:
    instance: Instance
    vertex_map: List[Optional[int]]        # compressed vertex -> original vertex (None for gadgets)
    arc_map: List[Optional[Tuple[int, str]]]  # compressed arc -> (path index, direction), None if weight-0
    extra_cost: int
    loops: List[Tuple[int, str]]           # (path index, loop type) to splice in
    budget: Optional[int] = None


def compress(r: ReducedInstance, catalog: PathCatalog, tables: List[TypeCostTable],
             assignment: Dict[int, str]) -> Optional[CompressedInstance]:
    """Build the compressed instance for one typing; None when the typing is rejected.

    Paths absent from `assignment` (or typed FREE) become plain arcs carrying the pass costs.
    """
    X = sorted(catalog.X)
    vid = {x: j for j, x in enumerate(X)}
    vertex_map: List[Optional[int]] = list(X)
    arcs: List[Arc] = []
    arc_map: List[Optional[Tuple[int, str]]] = []
    Wp = {vid[x] for x in X if x in r.waypoints}
    extra = 0
    loops = []

    def gadget(p: int, d: str, a: int, b: int) -> bool:
        ts = tables[p].tiers[d]
        if not ts:
            return False
        x = len(vertex_map)
        vertex_map.append(None)
        for c, cnt in ts:
            arcs.append(Arc(a, x, c, cnt))
            arc_map.append((p, d))
        total = None if any(cnt is None for _, cnt in ts) else sum(cnt for _, cnt in ts)
        arcs.append(Arc(x, b, 0, total))
        arc_map.append(None)
        Wp.update((a, b, x))
        return True

    for p, seq in enumerate(catalog.paths):
        u, v = vid[seq[0]], vid[seq[-1]]
        t = assignment.get(p, FREE)
        table = tables[p]
        if t == FREE:
            for d, a, b in ((PASS_UV, u, v), (PASS_VU, v, u)):
                for c, cnt in table.tiers[d]:
                    arcs.append(Arc(a, b, c, cnt))
                    arc_map.append((p, d))
            continue
        if table.cost[t] == INF:
            return None
        if t in (PASS_UV, PASS_BOTH):
            gadget(p, PASS_UV, u, v)
        if t in (PASS_VU, PASS_BOTH):
            gadget(p, PASS_VU, v, u)
        if t in (LOOP_U, LOOP_V, LOOP_BOTH):
            extra += int(table.cost[t])
            loops.append((p, t))
            if t in (LOOP_U, LOOP_BOTH):
                Wp.add(u)
            if t in (LOOP_V, LOOP_BOTH):
                Wp.add(v)
    if not Wp:
        return None
    budget = None
    if r.inst.budget is not None:
        budget = r.inst.budget - r.decrement - extra
        if budget < 0:
            return None
    pairs = [(a.tail, a.head) for a in arcs]
    inst = Instance(len(vertex_map), tuple(arcs), frozenset(Wp), budget, len(set(pairs)) != len(pairs))
    return CompressedInstance(inst, vertex_map, arc_map, extra, loops, budget)


def _splice(inst: Instance, walk: List[int], anchor: Optional[int], at: int, ext: List[int]) -> List[int]:
    if not walk:
        if anchor != at:
            raise AssertionError("splice point not on the walk")
        return list(ext)
    for p, i in enumerate(walk):
        if inst.arcs[i].tail == at:
            return walk[:p] + list(ext) + walk[p:]
    raise AssertionError("splice point not on the walk")


def _expand(r: ReducedInstance, catalog: PathCatalog, tables: List[TypeCostTable],
            comp: CompressedInstance, cwalk: ClosedWalk) -> Tuple[List[int], Optional[int]]:
    inst = r.inst
    # per (path, direction, edge): remaining uses of each arc, cheapest first
    remaining: Dict[Tuple[int, str], List[List[List[int]]]] = {}

    def take(p: int, d: str) -> List[int]:
        key = (p, d)
        if key not in remaining:
            remaining[key] = [[[i, inst.cap(i)] for i in lst] for lst in tables[p].edge_arcs[d]]
        out = []
        for lst in remaining[key]:
            for slot in lst:
                if slot[1] > 0:
                    slot[1] -= 1
                    out.append(slot[0])
                    break
            else:
                raise AssertionError("pass capacity exhausted")
        if d == PASS_VU:
            pass  # edge_arcs for v>u are listed from v towards u already
        return out

    walk: List[int] = []
    for ci in cwalk.arcs:
        m = comp.arc_map[ci]
        if m is None:
            continue
        walk.extend(take(*m))
    anchor = None
    if not walk:
        anchor = comp.vertex_map[cwalk.anchor] if cwalk.anchor is not None else None
    for p, t in comp.loops:
        seq = catalog.paths[p]
        ext = tables[p].loop_arcs[t]
        at = seq[0] if t in (LOOP_U, LOOP_BOTH) else seq[-1]
        if t == LOOP_BOTH:
            j = len(ext)
            # split back into the u-side and v-side visits
            u_part = []
            for i in ext:
                u_part.append(i)
                if inst.arcs[i].head == seq[0]:
                    break
            v_part = ext[len(u_part):]
            walk = _splice(inst, walk, anchor, seq[0], u_part)
            anchor = None
            walk = _splice(inst, walk, anchor, seq[-1], v_part)
            assert j == len(u_part) + len(v_part)
        else:
            walk = _splice(inst, walk, anchor, at, ext)
        anchor = None
    return walk, anchor


def _interior_candidate(r: ReducedInstance, catalog: PathCatalog) -> Optional[Tuple[int, List[int]]]:
    """Walks that never reach X stay inside one path and go back and forth once."""
    inst = r.inst
    for seq in catalog.paths:
        inner = set(seq[1:-1])
        if not r.waypoints <= inner:
            continue
        pos = sorted(i for i in range(1, len(seq) - 1) if seq[i] in r.waypoints)
        lo, hi = pos[0], pos[-1]
        fwd = _edge_arcs(r, seq)
        bwd = _edge_arcs(r, seq[::-1])[::-1]
        if any(not fwd[i] or not bwd[i] for i in range(lo, hi)):
            return None
        arcs = [fwd[i][0] for i in range(lo, hi)] + [bwd[i][0] for i in reversed(range(lo, hi))]
        return sum(inst.arcs[i].weight for i in arcs), arcs
    return None


def solve_fes(inst: Instance, max_branches: int = 2_000_000) -> Solution:
    stats: Dict = {"method": "fes", "branches": 0, "max_vertices": 0, "max_arcs": 0, "k": 0}
    original = inst
    r = apply_degree_one_reductions(inst.with_budget(None))
    if r is None:
        return infeasible(**stats)
    W = r.waypoints
    if len(W) <= 1:
        anchor = min(W) if W else min(inst.waypoints)
        walk = _splice_pendants(r, [], anchor)
        return finish(original, _closed(walk, anchor), r.decrement, **stats)
    g = r.underlying()
    adj = g.adjacency()
    if any(not adj[w] for w in W):
        return infeasible(**stats)
    F = feedback_edge_set(g)
    catalog = decompose_paths(r, F)
    stats["k"] = catalog.k
    stats["X"] = len(catalog.X)
    stats["paths"] = len(catalog.paths)
    tables = [path_type_costs(r, p) for p in catalog.paths]
    branching = [p for p, t in enumerate(tables) if t.internal_waypoints]
    options = []
    for p in branching:
        opts = [t for t in (PASS_UV, PASS_VU, PASS_BOTH, LOOP_U, LOOP_V, LOOP_BOTH) if tables[p].cost[t] < INF]
        if not opts:
            return infeasible(**stats)
        options.append(opts)

    def lower(assign: Dict[int, str]) -> float:
        lb = 0
        for p, t in assign.items():
            c = tables[p].cost
            lb += c[t]
        return lb

    combos = []
    for choice in itertools.product(*options):
        assign = dict(zip(branching, choice))
        combos.append((lower(assign), choice, assign))
        if len(combos) > max_branches:
            raise ValueError("too many branches")
    combos.sort(key=lambda c: (c[0], c[1]))
    best = None
    interior = _interior_candidate(r, catalog)
    if interior is not None:
        best = (interior[0], "interior", interior[1])
    for lb, _, assign in combos:
        if best is not None and lb >= best[0]:
            break
        comp = compress(r, catalog, tables, assign)
        if comp is None:
            continue
        stats["branches"] += 1
        stats["max_vertices"] = max(stats["max_vertices"], comp.instance.n)
        stats["max_arcs"] = max(stats["max_arcs"], comp.instance.m)
        sol = oracle_solve(comp.instance)
        if sol.status is Status.INFEASIBLE:
            continue
        total = sol.cost + comp.extra_cost
        if best is None or total < best[0]:
            best = (total, "branch", (comp, sol.walk))
    if best is None:
        return infeasible(**stats)
    total, kind, data = best
    if kind == "interior":
        walk, anchor = list(data), None
    else:
        comp, cwalk = data
        walk, anchor = _expand(r, catalog, tables, comp, cwalk)
    walk = _splice_pendants(r, walk, anchor)
    return finish(original, _closed(walk, anchor), total + r.decrement, **stats)


def _closed(walk: List[int], anchor: Optional[int]) -> ClosedWalk:
    return ClosedWalk(tuple(walk), None if walk else anchor)


def _splice_pendants(r: ReducedInstance, walk: List[int], anchor: Optional[int]) -> List[int]:
    for v, u, a_uv, a_vu in reversed(r.pendants):
        walk = _splice(r.inst, walk, anchor if not walk else None, u, [a_uv, a_vu])
    return walk
