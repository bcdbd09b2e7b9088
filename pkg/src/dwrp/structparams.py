"""Structural parameters: feedback edge sets, vertex-integrity modulators, tree decompositions."""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple

from .core import DWRPError, Instance

EXACT_TW_LIMIT = 20


class InvalidDecomposition(DWRPError):
    pass


@dataclass(frozen=True)
class UnderlyingGraph:
    n: int
    edges: FrozenSet[Tuple[int, int]]

    @staticmethod
    def from_instance(inst: Instance) -> "UnderlyingGraph":
        return UnderlyingGraph(inst.n, frozenset((min(a.tail, a.head), max(a.tail, a.head)) for a in inst.arcs))

    @staticmethod
    def of(n: int, edges: Iterable[Tuple[int, int]]) -> "UnderlyingGraph":
        return UnderlyingGraph(n, frozenset((min(u, v), max(u, v)) for u, v in edges if u != v))

    def adjacency(self) -> List[Set[int]]:
        adj: List[Set[int]] = [set() for _ in range(self.n)]
        for u, v in self.edges:
            adj[u].add(v)
            adj[v].add(u)
        return adj

    def components(self, removed: Iterable[int] = ()) -> List[List[int]]:
        removed = set(removed)
        adj = self.adjacency()
        seen = set(removed)
        comps = []
        for s in range(self.n):
            if s in seen:
                continue
            comp, stack = [], [s]
            seen.add(s)
            while stack:
                v = stack.pop()
                comp.append(v)
                for u in adj[v]:
                    if u not in seen:
                        seen.add(u)
                        stack.append(u)
            comps.append(sorted(comp))
        return comps


# ---------------------------------------------------------------- feedback edges

def feedback_edge_set(g: UnderlyingGraph) -> FrozenSet[Tuple[int, int]]:
    """Complement of a spanning forest, hence of minimum size m - n + c."""
    parent = list(range(g.n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    fes = []
    for u, v in sorted(g.edges):
        ru, rv = find(u), find(v)
        if ru == rv:
            fes.append((u, v))
        else:
            parent[ru] = rv
    return frozenset(fes)


# ---------------------------------------------------------------- vertex integrity

@dataclass(frozen=True)
class Modulator:
    M: FrozenSet[int]
    k: int
    components: Tuple[Tuple[int, ...], ...]


def _modulator_for(g: UnderlyingGraph, M: Iterable[int], k: int) -> Modulator:
    M = frozenset(M)
    comps = tuple(tuple(c) for c in g.components(M))
    return Modulator(M, k, comps)


def check_modulator(g: UnderlyingGraph, mod: Modulator) -> bool:
    if len(mod.M) > mod.k:
        return False
    comps = g.components(mod.M)
    return all(len(c) <= mod.k for c in comps)


def vertex_integrity_modulator(g: UnderlyingGraph, k: int) -> Optional[Modulator]:
    """Branch on a connected (k+1)-vertex subgraph: one of its vertices must be deleted."""
    if k < 1:
        raise ValueError("k must be at least 1")
    adj = g.adjacency()

    def big_connected_set(removed: Set[int]) -> Optional[List[int]]:
        seen = set(removed)
        for s in range(g.n):
            if s in seen:
                continue
            comp, stack = [s], [s]
            seen.add(s)
            while stack and len(comp) <= k:
                v = stack.pop()
                for u in sorted(adj[v]):
                    if u not in seen:
                        seen.add(u)
                        comp.append(u)
                        stack.append(u)
                        if len(comp) > k:
                            break
            if len(comp) > k:
                return comp[:k + 1]
            # finish exploring this component so it is not restarted
            while stack:
                v = stack.pop()
                for u in adj[v]:
                    if u not in seen:
                        seen.add(u)
                        stack.append(u)
        return None

    def branch(removed: Set[int]) -> Optional[Set[int]]:
        big = big_connected_set(removed)
        if big is None:
            return set(removed)
        if len(removed) == k:
            return None
        for v in big:
            removed.add(v)
            res = branch(removed)
            removed.discard(v)
            if res is not None:
                return res
        return None

    res = branch(set())
    return None if res is None else _modulator_for(g, res, k)


def vertex_integrity(g: UnderlyingGraph, limit: int) -> Optional[Modulator]:
    """Smallest k <= limit with a modulator, or None."""
    for k in range(1, limit + 1):
        mod = vertex_integrity_modulator(g, k)
        if mod is not None:
            return mod
    return None


# ---------------------------------------------------------------- tree decompositions

@dataclass
class TreeDecomposition:
    bags: List[FrozenSet[int]]
    edges: List[Tuple[int, int]]

    @property
    def width(self) -> int:
        return max((len(b) for b in self.bags), default=0) - 1


def _fill_bags(g: UnderlyingGraph, order: List[int]) -> TreeDecomposition:
    adj = [set(s) for s in g.adjacency()]
    pos = {v: i for i, v in enumerate(order)}
    bags: List[FrozenSet[int]] = []
    later_nbrs = []
    for v in order:
        nb = {u for u in adj[v] if pos[u] > pos[v]}
        for a in nb:
            adj[a] |= nb - {a}
        later_nbrs.append(nb)
        bags.append(frozenset(nb | {v}))
    edges = []
    for i, v in enumerate(order):
        nb = later_nbrs[i]
        if nb:
            j = min(pos[u] for u in nb)
            edges.append((i, j))
    # join the forest into one tree
    parent = list(range(len(order)))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in edges:
        parent[find(a)] = find(b)
    roots = sorted({find(i) for i in range(len(order))})
    for r in roots[1:]:
        edges.append((r, roots[0]))
    return TreeDecomposition(bags, edges)


def _exact_order(g: UnderlyingGraph) -> List[int]:
    n = g.n
    nbm = [0] * n
    for u, v in g.edges:
        nbm[u] |= 1 << v
        nbm[v] |= 1 << u

    def q_size(S: int, v: int) -> int:
        # vertices outside S+v adjacent to the component of v in G[S+v]
        comp = 1 << v
        frontier = comp
        allowed = S | (1 << v)
        reach = 0
        while frontier:
            b = frontier & -frontier
            frontier ^= b
            nb = nbm[b.bit_length() - 1]
            reach |= nb
            new = nb & allowed & ~comp
            comp |= new
            frontier |= new
        return bin(reach & ~comp & ~allowed).count("1")

    full = (1 << n) - 1
    tw = {0: -1}
    choice = {}
    for S in range(1, full + 1):
        best, arg = None, -1
        rest = S
        while rest:
            b = rest & -rest
            rest ^= b
            v = b.bit_length() - 1
            prev = S ^ b
            val = max(tw[prev], q_size(prev, v))
            if best is None or val < best:
                best, arg = val, v
        tw[S] = best
        choice[S] = arg
    order = []
    S = full
    while S:
        v = choice[S]
        order.append(v)
        S ^= 1 << v
    order.reverse()
    return order


def _min_fill_order(g: UnderlyingGraph) -> List[int]:
    adj = [set(s) for s in g.adjacency()]
    alive = set(range(g.n))
    order = []
    while alive:
        def fill(v):
            nb = list(adj[v])
            return sum(1 for a, b in combinations(nb, 2) if b not in adj[a])
        v = min(sorted(alive), key=lambda u: (fill(u), len(adj[u]), u))
        nb = adj[v]
        for a in nb:
            adj[a] |= nb - {a}
            adj[a].discard(v)
        alive.discard(v)
        order.append(v)
    return order


def exact_tree_decomposition(g: UnderlyingGraph, exact_limit: int = EXACT_TW_LIMIT) -> Tuple[TreeDecomposition, bool]:
    """Returns (decomposition, exact?). Exact width for n <= exact_limit."""
    if g.n == 0:
        return TreeDecomposition([], []), True
    if g.n <= exact_limit:
        return _fill_bags(g, _exact_order(g)), True
    return _fill_bags(g, _min_fill_order(g)), False


def check_tree_decomposition(g: UnderlyingGraph, td: TreeDecomposition) -> bool:
    nb = len(td.bags)
    if nb == 0:
        return g.n == 0
    if len(td.edges) != nb - 1:
        return False
    tadj: List[Set[int]] = [set() for _ in range(nb)]
    for a, b in td.edges:
        tadj[a].add(b)
        tadj[b].add(a)
    seen, stack = {0}, [0]
    while stack:
        x = stack.pop()
        for y in tadj[x]:
            if y not in seen:
                seen.add(y)
                stack.append(y)
    if len(seen) != nb:
        return False
    for v in range(g.n):
        occ = [i for i, b in enumerate(td.bags) if v in b]
        if not occ:
            return False
        occ_set = set(occ)
        seen, stack = {occ[0]}, [occ[0]]
        while stack:
            x = stack.pop()
            for y in tadj[x]:
                if y in occ_set and y not in seen:
                    seen.add(y)
                    stack.append(y)
        if seen != occ_set:
            return False
    for u, v in g.edges:
        if not any(u in b and v in b for b in td.bags):
            return False
    return True


# ---------------------------------------------------------------- nice decompositions

LEAF, INTRO_VERTEX, INTRO_EDGE, FORGET, JOIN = "leaf", "introduce_vertex", "introduce_edge", "forget", "join"


@dataclass
class NiceNode:
    kind: str
    bag: FrozenSet[int]
    children: List[int] = field(default_factory=list)
    vertex: Optional[int] = None
    edge: Optional[Tuple[int, int]] = None


@dataclass
class NiceTreeDecomposition:
    nodes: List[NiceNode]
    root: int
    anchor: Optional[int]

    @property
    def width(self) -> int:
        return max(len(x.bag) for x in self.nodes) - 1

    def postorder(self) -> List[int]:
        out, stack = [], [(self.root, False)]
        while stack:
            x, done = stack.pop()
            if done:
                out.append(x)
                continue
            stack.append((x, True))
            for c in reversed(self.nodes[x].children):
                stack.append((c, False))
        return out


def make_nice(td: TreeDecomposition, anchor: int, g: UnderlyingGraph) -> NiceTreeDecomposition:
    """Nice form rooted at a bag holding the anchor; every vertex except the anchor is forgotten."""
    if not check_tree_decomposition(g, td):
        raise InvalidDecomposition("input is not a tree decomposition of the graph")
    if not 0 <= anchor < g.n:
        raise InvalidDecomposition("anchor not a vertex")
    nb = len(td.bags)
    tadj: List[List[int]] = [[] for _ in range(nb)]
    for a, b in td.edges:
        tadj[a].append(b)
        tadj[b].append(a)
    root_bag = min(i for i, b in enumerate(td.bags) if anchor in b)
    nodes: List[NiceNode] = []
    introduced: Set[Tuple[int, int]] = set()
    edges_of: Dict[int, List[Tuple[int, int]]] = {v: [] for v in range(g.n)}
    for u, v in sorted(g.edges):
        edges_of[u].append((u, v))
        edges_of[v].append((u, v))

    def new(kind, bag, children=(), vertex=None, edge=None) -> int:
        nodes.append(NiceNode(kind, frozenset(bag), list(children), vertex, edge))
        return len(nodes) - 1

    def forget(top: int, v: int) -> int:
        bag = nodes[top].bag
        for e in edges_of[v]:
            if e not in introduced and e[0] in bag and e[1] in bag:
                introduced.add(e)
                top = new(INTRO_EDGE, bag, [top], edge=e)
        return new(FORGET, bag - {v}, [top], vertex=v)

    def morph(top: int, target: FrozenSet[int]) -> int:
        for v in sorted(nodes[top].bag - target):
            top = forget(top, v)
        for v in sorted(target - nodes[top].bag):
            top = new(INTRO_VERTEX, nodes[top].bag | {v}, [top], vertex=v)
        return top

    # iterative post-order over the raw tree
    parent = {root_bag: None}
    order, stack = [], [root_bag]
    while stack:
        x = stack.pop()
        order.append(x)
        for y in sorted(tadj[x], reverse=True):
            if y not in parent:
                parent[y] = x
                stack.append(y)
    built: Dict[int, int] = {}
    for x in reversed(order):
        bag = td.bags[x]
        kids = [y for y in tadj[x] if parent.get(y) == x]
        tops = [morph(built[y], bag) for y in sorted(kids)]
        if not tops:
            tops = [morph(new(LEAF, ()), bag)]
        while len(tops) > 1:
            a, b = tops.pop(0), tops.pop(0)
            tops.append(new(JOIN, bag, [a, b]))
        built[x] = tops[0]
    top = built[root_bag]
    top = morph(top, frozenset({anchor}))
    return NiceTreeDecomposition(nodes, top, anchor)


def check_nice(g: UnderlyingGraph, ntd: NiceTreeDecomposition) -> List[str]:
    """Independent axiom checker; returns a list of problems (empty when valid)."""
    problems = []
    nodes = ntd.nodes
    seen_edges: Dict[Tuple[int, int], int] = {}
    parent_of: Dict[int, int] = {}
    for i, x in enumerate(nodes):
        for c in x.children:
            if c in parent_of:
                problems.append(f"node {c} has two parents")
            parent_of[c] = i
        kids = [nodes[c] for c in x.children]
        if x.kind == LEAF:
            if kids or x.bag:
                problems.append(f"leaf {i} not empty")
        elif x.kind == INTRO_VERTEX:
            if len(kids) != 1 or x.vertex in kids[0].bag or kids[0].bag | {x.vertex} != x.bag:
                problems.append(f"bad introduce-vertex {i}")
        elif x.kind == FORGET:
            if len(kids) != 1 or x.vertex not in kids[0].bag or kids[0].bag - {x.vertex} != x.bag:
                problems.append(f"bad forget {i}")
        elif x.kind == INTRO_EDGE:
            u, v = x.edge
            if len(kids) != 1 or kids[0].bag != x.bag or u not in x.bag or v not in x.bag:
                problems.append(f"bad introduce-edge {i}")
            seen_edges[x.edge] = seen_edges.get(x.edge, 0) + 1
        elif x.kind == JOIN:
            if len(kids) != 2 or any(k.bag != x.bag for k in kids):
                problems.append(f"bad join {i}")
        else:
            problems.append(f"unknown kind at {i}")
    if ntd.root in parent_of:
        problems.append("root has a parent")
    reach, stack = set(), [ntd.root]
    while stack:
        x = stack.pop()
        reach.add(x)
        stack.extend(nodes[x].children)
    if len(reach) != len(nodes):
        problems.append("nodes unreachable from root")
    for e in g.edges:
        if seen_edges.get(e, 0) != 1:
            problems.append(f"edge {e} introduced {seen_edges.get(e, 0)} times")
    for e in seen_edges:
        if e not in g.edges:
            problems.append(f"non-edge {e} introduced")
    for v in range(g.n):
        occ = {i for i, x in enumerate(nodes) if v in x.bag}
        if not occ:
            problems.append(f"vertex {v} in no bag")
            continue
        tops = [i for i in occ if parent_of.get(i) not in occ]
        if len(tops) != 1:
            problems.append(f"occurrences of {v} not connected")
    if ntd.anchor is not None and nodes[ntd.root].bag != frozenset({ntd.anchor}):
        problems.append("root bag is not exactly the anchor")
    return problems
