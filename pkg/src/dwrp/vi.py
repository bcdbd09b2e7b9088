"""Solver parameterized by vertex integrity.

With a modulator M whose removal leaves small components, an optimal walk splits
into arcs inside M and segments that dip into one component. Per component we
enumerate traversals (choices of segments covering its waypoints), guess how the
walk connects the modulator (a skeleton), and pick traversals plus extra connector
paths with a small block-structured integer program.
"""
from __future__ import annotations

import itertools
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from .core import DWRPError, Instance, TooLarge, multiset_to_walk
from .oracle import Solution, finish, infeasible, oracle_solve, trivial_solution, Status
from .structparams import Modulator, UnderlyingGraph, vertex_integrity

TRAVERSAL_LIMIT = 200_000
SEGMENT_LIMIT = 200_000


class TooMany(DWRPError):
    pass


class InfeasibleGuess(DWRPError):
    pass


@dataclass(frozen=True)
class Segment:
    arcs: Tuple[int, ...]
    u: int
    v: int
    comp: Optional[int]          # None for a trivial segment (one arc inside M)
    covers: FrozenSet[int]       # waypoints among the internal vertices
    cost: int

    @property
    def trivial(self) -> bool:
        return self.comp is None


@dataclass(frozen=True)
class Traversal:
    segments: Tuple[int, ...]    # indices into the component's segment list, sorted
    occurrences: int             # vertex occurrences summed over segments
    usage: Tuple[Tuple[int, int], ...]  # (arc, times used)
    cost: int
    pairs: FrozenSet[Tuple[int, int]] = frozenset()  # endpoint pairs u != v of its segments
    ends: FrozenSet[int] = frozenset()


@dataclass(frozen=True)
class Skeleton:
    H0: FrozenSet[Tuple[int, int]]
    H1: FrozenSet[Tuple[int, int]]
    core: FrozenSet[int]

    @property
    def H(self) -> FrozenSet[Tuple[int, int]]:
        return self.H0 | self.H1

    def allows(self, u: int, v: int) -> bool:
        return u in self.core and v in self.core and (u == v or (u, v) in self.H)

    def admits(self, t: "Traversal") -> bool:
        return t.ends <= self.core and t.pairs <= self.H


def _component_of(mod: Modulator, comp) -> FrozenSet[int]:
    if isinstance(comp, int):
        return frozenset(mod.components[comp])
    return frozenset(comp)


def _segment(inst: Instance, arcs: Sequence[int], comp_id, W) -> Segment:
    verts = [inst.arcs[arcs[0]].tail] + [inst.arcs[i].head for i in arcs]
    return Segment(tuple(arcs), verts[0], verts[-1], comp_id,
                   frozenset(x for x in verts[1:-1] if x in W),
                   sum(inst.arcs[i].weight for i in arcs))


def is_minimal(inst: Instance, seg: Segment, M) -> bool:
    """No walk from u to v over a proper sub-multiset of the arcs covers the same waypoints."""
    left = Counter(seg.arcs)
    L = len(seg.arcs)
    out = defaultdict(list)
    for i in left:
        out[inst.arcs[i].tail].append(i)
    need = seg.covers

    def dfs(x: int, used: int, seen: FrozenSet[int]) -> bool:
        for i in out[x]:
            if not left[i] or used + 1 >= L:
                continue
            h = inst.arcs[i].head
            if h in M:
                if h == seg.v and need <= seen:
                    return True
                continue
            left[i] -= 1
            hit = dfs(h, used + 1, seen | ({h} & need))
            left[i] += 1
            if hit:
                return True
        return False

    return not dfs(seg.u, 0, frozenset())


def enumerate_segments(inst: Instance, mod: Modulator, comp, comp_id: int = 0,
                       limit: int = SEGMENT_LIMIT) -> List[Segment]:
    """All minimal non-trivial segments through one component.

    A minimal segment never repeats a vertex between two consecutive first visits of
    new waypoints (cutting the repeat would give a cheaper walk on a sub-multiset), so
    generation walks simple pieces that end at a fresh waypoint or at an exit into M.
    """
    C = _component_of(mod, comp)
    M = frozenset(mod.M)
    W = inst.waypoints
    out = inst.out_arcs()
    found = set()
    segs: List[Segment] = []

    def dfs(x: int, path: List[int], covered: FrozenSet[int], piece: FrozenSet[int]) -> None:
        for i in out[x]:
            h = inst.arcs[i].head
            if h in M:
                if x in C:
                    arcs = tuple(path + [i])
                    if arcs not in found:
                        found.add(arcs)
                        if len(found) > limit:
                            raise TooMany(f"more than {limit} candidate segments")
                continue
            if h not in C:
                continue
            if h in W and h not in covered:
                dfs(h, path + [i], covered | {h}, frozenset([h]))
            elif h not in piece:
                dfs(h, path + [i], covered, piece | {h})

    for u in sorted(M):
        dfs(u, [], frozenset(), frozenset())
    for arcs in sorted(found):
        s = _segment(inst, arcs, comp_id, W)
        if is_minimal(inst, s, M):
            segs.append(s)
    segs.sort(key=lambda s: (s.u, s.v, s.cost, s.arcs))
    return segs


def enumerate_connectors(inst: Instance, mod: Modulator, comp, comp_id: int = 0) -> List[Segment]:
    """Simple paths u -> C -> v with u != v in M."""
    C = _component_of(mod, comp)
    M = frozenset(mod.M)
    out = inst.out_arcs()
    res: List[Segment] = []

    def dfs(u: int, x: int, path: List[int], seen: FrozenSet[int]) -> None:
        for i in out[x]:
            h = inst.arcs[i].head
            if h in M:
                if x in C and h != u:
                    res.append(_segment(inst, path + [i], comp_id, inst.waypoints))
            elif h in C and h not in seen:
                dfs(u, h, path + [i], seen | {h})

    for u in sorted(M):
        dfs(u, u, [], frozenset())
    res.sort(key=lambda s: (s.u, s.v, s.cost, s.arcs))
    return res


def check_traversal(inst: Instance, C, segments: Sequence[Segment], M) -> List[str]:
    """The four defining conditions; returns the violated ones."""
    problems = []
    need = frozenset(C) & inst.waypoints
    covered = frozenset().union(*[s.covers for s in segments]) if segments else frozenset()
    if covered != need:
        problems.append("cover")
    for j, s in enumerate(segments):
        rest = [t.covers for k, t in enumerate(segments) if k != j]
        others = frozenset().union(*rest) if rest else frozenset()
        if s.covers <= others:
            problems.append("redundant")
            break
    if not all(is_minimal(inst, s, M) for s in segments):
        problems.append("minimal")
    use = Counter(i for s in segments for i in s.arcs)
    if any(c > inst.cap(i) for i, c in use.items()):
        problems.append("capacity")
    return problems


def _occurrences(seg: Segment) -> int:
    return len(seg.arcs) + 1


def enumerate_traversals(inst: Instance, mod: Modulator, comp, segments: Optional[List[Segment]] = None,
                         limit: int = TRAVERSAL_LIMIT) -> List[Traversal]:
    C = _component_of(mod, comp)
    if segments is None:
        segments = enumerate_segments(inst, mod, C)
    need = sorted(C & inst.waypoints)
    if not need:
        return [Traversal((), 0, (), 0)]
    by_w: Dict[int, List[int]] = {w: [] for w in need}
    for j, s in enumerate(segments):
        for w in s.covers:
            by_w[w].append(j)
    found = set()
    res: List[Traversal] = []
    count = {w: 0 for w in need}   # how many chosen segments cover each waypoint
    use: Dict[int, int] = defaultdict(int)
    seg_use = [Counter(x.arcs) for x in segments]
    chosen: List[int] = []

    def redundant() -> bool:
        return any(all(count[w] > 1 for w in segments[j].covers) for j in chosen)

    def rec() -> None:
        rest = [w for w in need if not count[w]]
        if not rest:
            key = tuple(sorted(chosen))
            if key in found:
                return
            found.add(key)
            segs = [segments[j] for j in key]
            res.append(Traversal(key, sum(_occurrences(x) for x in segs),
                                 tuple(sorted((i, c) for i, c in use.items() if c)),
                                 sum(x.cost for x in segs),
                                 frozenset((x.u, x.v) for x in segs if x.u != x.v),
                                 frozenset(y for x in segs for y in (x.u, x.v))))
            if len(res) > limit:
                raise TooMany(f"more than {limit} traversals")
            return
        for j in by_w[rest[0]]:
            seg = segments[j]
            chosen.append(j)
            for w in seg.covers:
                count[w] += 1
            ok = True
            for i, c in seg_use[j].items():
                use[i] += c
                ok = ok and use[i] <= inst.cap(i)
            if ok and not redundant():
                rec()
            for i, c in seg_use[j].items():
                use[i] -= c
            for w in seg.covers:
                count[w] -= 1
            chosen.pop()

    rec()
    return res


def _strong_core(M: Sequence[int], arcs) -> Optional[FrozenSet[int]]:
    """Vertex set of the unique nontrivial SCC when every non-isolated vertex is in it."""
    touched = {x for a in arcs for x in a}
    if not touched:
        return frozenset()
    adj = defaultdict(set)
    radj = defaultdict(set)
    for u, v in arcs:
        adj[u].add(v)
        radj[u].add(v) if False else radj[v].add(u)
    start = min(touched)
    for g in (adj, radj):
        seen = {start}
        stack = [start]
        while stack:
            x = stack.pop()
            for y in g[x]:
                if y not in seen:
                    seen.add(y)
                    stack.append(y)
        if seen != touched:
            return None
    return frozenset(touched)


def enumerate_skeletons(mod: Modulator, W, P0=None, P1=None) -> List[Skeleton]:
    """All (H0, H1) on M whose union has one strongly connected part holding W∩M.

    When the union has no arcs the core is a single chosen vertex. P0/P1 optionally
    restrict the arcs available to H0/H1.
    """
    M = sorted(mod.M)
    WM = frozenset(W) & frozenset(M)
    pairs = [(u, v) for u in M for v in M if u != v]
    P0 = pairs if P0 is None else [p for p in pairs if p in set(P0)]
    P1 = pairs if P1 is None else [p for p in pairs if p in set(P1)]
    res = []
    for m in M:
        if WM <= {m}:
            res.append(Skeleton(frozenset(), frozenset(), frozenset([m])))
    for r0 in range(len(P0) + 1):
        for h0 in itertools.combinations(P0, r0):
            for r1 in range(len(P1) + 1):
                for h1 in itertools.combinations(P1, r1):
                    union = set(h0) | set(h1)
                    if not union:
                        continue
                    core = _strong_core(M, union)
                    if core is None or not WM <= core:
                        continue
                    res.append(Skeleton(frozenset(h0), frozenset(h1), core))
    return res


# ---------------------------------------------------------------- integer program

@dataclass
class Variable:
    name: Tuple
    lb: int
    ub: int
    cost: int
    brick: int


@dataclass
class Constraint:
    coeffs: Dict[int, int]
    lo: float
    hi: float
    brick: Optional[int]          # None for a global (linking) constraint


@dataclass
class NFoldProgram:
    variables: List[Variable] = field(default_factory=list)
    constraints: List[Constraint] = field(default_factory=list)
    bricks: List[str] = field(default_factory=list)

    def add_var(self, name, lb, ub, cost, brick) -> int:
        self.variables.append(Variable(name, lb, ub, cost, brick))
        return len(self.variables) - 1

    def add(self, coeffs: Dict[int, int], lo: float, hi: float, brick: Optional[int] = None) -> None:
        self.constraints.append(Constraint({k: c for k, c in coeffs.items() if c}, lo, hi, brick))

    def locals_of(self, brick: int) -> List[Constraint]:
        return [c for c in self.constraints if c.brick == brick]

    def globals(self) -> List[Constraint]:
        return [c for c in self.constraints if c.brick is None]

    def objective(self, x: Sequence[int]) -> int:
        return sum(v.cost * xi for v, xi in zip(self.variables, x))

    def satisfied(self, x: Sequence[int]) -> bool:
        for v, xi in zip(self.variables, x):
            if not v.lb <= xi <= v.ub:
                return False
        for c in self.constraints:
            s = sum(a * x[j] for j, a in c.coeffs.items())
            if not c.lo <= s <= c.hi:
                return False
        return True


def solve_nfold(p: NFoldProgram) -> Optional[Tuple[int, List[int]]]:
    """Exact optimum of the program (HiGHS branch and cut), or None when infeasible."""
    from scipy.optimize import Bounds, LinearConstraint, milp
    from scipy.sparse import coo_matrix

    nv = len(p.variables)
    if nv == 0:
        return (0, []) if all(c.lo <= 0 <= c.hi for c in p.constraints) else None
    c = np.array([v.cost for v in p.variables], dtype=float)
    bounds = Bounds([v.lb for v in p.variables], [v.ub for v in p.variables])
    cons = []
    if p.constraints:
        rows, cols, vals = [], [], []
        lo = np.empty(len(p.constraints))
        hi = np.empty(len(p.constraints))
        for r, con in enumerate(p.constraints):
            for j, a in con.coeffs.items():
                rows.append(r)
                cols.append(j)
                vals.append(a)
            lo[r], hi[r] = con.lo, con.hi
        A = coo_matrix((vals, (rows, cols)), shape=(len(p.constraints), nv)).tocsr()
        cons.append(LinearConstraint(A, lo, hi))
    res = milp(c, constraints=cons, integrality=np.ones(nv), bounds=bounds,
               options={"mip_rel_gap": 0.0, "presolve": True})
    if res.status == 2 or res.x is None:
        if res.status not in (0, 2):
            raise TooLarge(f"integer program solver stopped: {res.message}")
        return None
    x = [int(round(t)) for t in res.x]
    if not p.satisfied(x):
        raise TooLarge("integer program solution failed the exact recheck")
    return p.objective(x), x


@dataclass
class Brick:
    comp: Optional[int]
    traversals: List[Traversal]
    connectors: List[Segment]


def build_nfold(inst: Instance, mod: Modulator, skel: Skeleton,
                segments: List[List[Segment]], traversals: List[List[Traversal]],
                connectors: List[List[Segment]]) -> NFoldProgram:
    M = sorted(mod.M)
    Mset = set(M)
    p = NFoldProgram()
    balance: Dict[int, Dict[int, int]] = {m: defaultdict(int) for m in M}
    h1_use: Dict[Tuple[int, int], Dict[int, int]] = {a: defaultdict(int) for a in skel.H1}

    for ci, comp in enumerate(mod.components):
        p.bricks.append(f"component {ci}")
        segs = segments[ci]
        good = [t for t in traversals[ci] if skel.admits(t)]
        if not good:
            raise InfeasibleGuess(f"component {ci} has only bad traversals")
        cap_rows: Dict[int, Dict[int, int]] = defaultdict(dict)
        ys = []
        for ti, t in enumerate(good):
            y = p.add_var(("traversal", ci, t.segments), 0, 1, t.cost, ci)
            ys.append(y)
            for a, c in t.usage:
                if inst.arcs[a].capacity is not None:
                    cap_rows[a][y] = c
            for j in t.segments:
                s = segs[j]
                if s.u != s.v:
                    balance[s.u][y] += 1
                    balance[s.v][y] -= 1
                    if (s.u, s.v) in h1_use:
                        h1_use[(s.u, s.v)][y] += 1
        p.add({y: 1 for y in ys}, 1, 1, ci)
        for s in connectors[ci]:
            if not skel.allows(s.u, s.v):
                continue
            ub = min([len(inst.waypoints)] + [inst.cap(i) for i in s.arcs])
            z = p.add_var(("connector", ci, s.arcs), 0, ub, s.cost, ci)
            use = Counter(s.arcs)
            for a, c in use.items():
                if inst.arcs[a].capacity is not None:
                    cap_rows[a][z] = c
            balance[s.u][z] += 1
            balance[s.v][z] -= 1
            if (s.u, s.v) in h1_use:
                h1_use[(s.u, s.v)][z] += 1
        for a, row in sorted(cap_rows.items()):
            p.add(row, 0, inst.cap(a), ci)

    h0_use: Dict[Tuple[int, int], Dict[int, int]] = {a: {} for a in skel.H0}
    for i, a in enumerate(inst.arcs):
        if a.tail in Mset and a.head in Mset:
            if (a.tail, a.head) not in skel.H0:
                continue
            brick = len(p.bricks)
            p.bricks.append(f"arc {i}")
            t = p.add_var(("arc", i), 0, min(inst.cap(i), len(inst.waypoints)), a.weight, brick)
            h0_use[(a.tail, a.head)][t] = 1
            balance[a.tail][t] += 1
            balance[a.head][t] -= 1
    for pair, row in sorted(h0_use.items()):
        if not row:
            raise InfeasibleGuess(f"no arc for {pair}")
        p.add(row, 1, np.inf)
    for pair, row in sorted(h1_use.items()):
        if not row:
            raise InfeasibleGuess(f"no segment for {pair}")
        p.add(dict(row), 1, np.inf)
    for m in M:
        if balance[m]:
            p.add(dict(balance[m]), 0, 0)
    return p


# ---------------------------------------------------------------- driver

@dataclass
class VIData:
    segments: List[List[Segment]]
    connectors: List[List[Segment]]
    traversals: List[List[Traversal]]
    signatures: List[Dict] = field(default_factory=list)  # (ends, pairs) -> cheapest traversal
    candidates: List[List[Traversal]] = field(default_factory=list)  # undominated traversals
    links: List[List[Segment]] = field(default_factory=list)         # undominated connectors


def prepare(inst: Instance, mod: Modulator) -> VIData:
    segs, conns, travs = [], [], []
    for ci, comp in enumerate(mod.components):
        s = enumerate_segments(inst, mod, comp, ci)
        segs.append(s)
        conns.append(enumerate_connectors(inst, mod, comp, ci))
        travs.append(enumerate_traversals(inst, mod, comp, s))
    sigs = []
    for ts in travs:
        d: Dict = {}
        for t in ts:
            key = (t.ends, t.pairs)
            d[key] = min(d.get(key, t.cost), t.cost)
        sigs.append(d)
    cands, links = [], []
    for ci, ts in enumerate(travs):
        segs_ci = segs[ci]

        def sig(t, segs_ci=segs_ci):
            return (t.ends, tuple(sorted(Counter((segs_ci[j].u, segs_ci[j].v) for j in t.segments
                                                 if segs_ci[j].u != segs_ci[j].v).items())))
        cands.append(prune_dominated(inst, ts, sig))
        links.append(prune_dominated(inst, conns[ci], lambda s: (s.u, s.v)))
    return VIData(segs, conns, travs, sigs, cands, links)


def prune_dominated(inst: Instance, items, signature):
    """Drop items matched by a no costlier item with the same signature and no more use of bounded arcs.

    Arcs without a capacity get no capacity row in the program, so they do not matter here.
    """
    groups: Dict = defaultdict(list)
    for it in items:
        groups[signature(it)].append(it)
    keep = []
    for key in sorted(groups, key=repr):
        kept: List[Tuple[Dict[int, int], object]] = []
        for cost, _, it, use in sorted((it.cost, j, it, _bounded_use(inst, it)) for j, it in enumerate(groups[key])):
            if any(all(use.get(a, 0) >= c for a, c in k.items()) for k, _ in kept):
                continue
            kept.append((use, it))
        keep.extend(it for _, it in kept)
    return keep


def _bounded_use(inst: Instance, it) -> Dict[int, int]:
    pairs = it.usage if isinstance(it, Traversal) else Counter(it.arcs).items()
    return {a: c for a, c in pairs if inst.arcs[a].capacity is not None}


def _skeleton_lower_bound(mod: Modulator, data: VIData, skel: Skeleton, cheapest0, cheapest1) -> float:
    """Trivial arcs are disjoint from segments; segments pay for H1 or for the traversals."""
    direct = sum(cheapest0[a] for a in skel.H0)
    linking = sum(cheapest1[a] for a in skel.H1)
    trav = 0
    for ci in range(len(mod.components)):
        trav += min((c for (ends, pairs), c in data.signatures[ci].items()
                     if ends <= skel.core and pairs <= skel.H), default=np.inf)
    return direct + max(linking, trav)


def solve_vi(inst: Instance, mod: Optional[Modulator] = None) -> Solution:
    W = inst.waypoints
    if len(W) <= 1:
        return trivial_solution(inst)
    if mod is None:
        mod = vertex_integrity(UnderlyingGraph.from_instance(inst), inst.n)
    stats: Dict = {"method": "vi", "k": mod.k, "M": sorted(mod.M), "skeletons": 0, "programs": 0,
                   "max_traversal_occurrences": 0, "max_traversal_arc_use": 0}
    best: Optional[Tuple[int, Dict[int, int], int]] = None

    # walks that never touch M live inside a single component
    for comp in mod.components:
        if W <= set(comp):
            sub, back, verts = _induced(inst, comp)
            sol = oracle_solve(sub)
            if sol.status is not Status.INFEASIBLE:
                ms = Counter(back[i] for i in sol.walk.arcs)
                best = (sol.cost, dict(ms), verts[sol.walk.start(sub)])
    if mod.M:
        data = prepare(inst, mod)
        for ts in data.traversals:
            for t in ts:
                stats["max_traversal_occurrences"] = max(stats["max_traversal_occurrences"], t.occurrences)
                stats["max_traversal_arc_use"] = max(stats["max_traversal_arc_use"],
                                                     max((c for _, c in t.usage), default=0))
        Mset = set(mod.M)
        cheapest0: Dict[Tuple[int, int], int] = {}
        for a in inst.arcs:
            if a.tail in Mset and a.head in Mset:
                key = (a.tail, a.head)
                cheapest0[key] = min(cheapest0.get(key, a.weight), a.weight)
        cheapest1: Dict[Tuple[int, int], int] = {}
        for lst in data.segments + data.connectors:
            for s in lst:
                if s.u != s.v:
                    cheapest1[(s.u, s.v)] = min(cheapest1.get((s.u, s.v), s.cost), s.cost)
        skels = enumerate_skeletons(mod, W, P0=cheapest0.keys(), P1=cheapest1.keys())
        scored = [(_skeleton_lower_bound(mod, data, s, cheapest0, cheapest1), j, s)
                  for j, s in enumerate(skels)]
        scored.sort(key=lambda t: (t[0], t[1]))
        stats["skeletons"] = len(skels)
        for lb, _, skel in scored:
            if lb == np.inf or (best is not None and lb >= best[0]):
                break
            try:
                prog = build_nfold(inst, mod, skel, data.segments, data.candidates, data.links)
            except InfeasibleGuess:
                continue
            stats["programs"] += 1
            res = solve_nfold(prog)
            if res is None:
                continue
            val, x = res
            if best is None or val < best[0]:
                best = (val, _multiset(prog, x, data, mod), min(skel.core))
    if best is None:
        return infeasible(**stats)
    cost, ms, anchor = best
    if not ms:
        return finish(inst, multiset_to_walk(inst, {}, anchor), cost, **stats)
    if anchor not in {inst.arcs[i].tail for i in ms}:
        anchor = inst.arcs[min(ms)].tail
    walk = multiset_to_walk(inst, ms, anchor)
    return finish(inst, walk, cost, **stats)


def _multiset(prog: NFoldProgram, x: List[int], data: VIData, mod: Modulator) -> Dict[int, int]:
    ms: Dict[int, int] = defaultdict(int)
    for v, xi in zip(prog.variables, x):
        if not xi:
            continue
        kind = v.name[0]
        if kind == "arc":
            ms[v.name[1]] += xi
        elif kind == "traversal":
            ci = v.name[1]
            for j in v.name[2]:
                for i in data.segments[ci][j].arcs:
                    ms[i] += xi
        else:
            for i in v.name[2]:
                ms[i] += xi
    return dict(ms)


def _induced(inst: Instance, comp) -> Tuple[Instance, List[int], List[int]]:
    verts = sorted(comp)
    vid = {v: j for j, v in enumerate(verts)}
    arcs, back = [], []
    for i, a in enumerate(inst.arcs):
        if a.tail in vid and a.head in vid:
            arcs.append(a.__class__(vid[a.tail], vid[a.head], a.weight, a.capacity))
            back.append(i)
    sub = Instance(len(verts), tuple(arcs), frozenset(vid[w] for w in inst.waypoints), None, inst.multiarc)
    return sub, back, verts
