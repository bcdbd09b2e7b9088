"""Instance model, walk validation, cycle decomposition and text I/O."""
from __future__ import annotations

import heapq
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

INF = math.inf


class DWRPError(Exception):
    """Base class for all errors raised by the package."""


class ParseError(DWRPError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class SemanticError(DWRPError):
    pass


class NotClosed(DWRPError):
    pass


class NotBalanced(DWRPError):
    pass


class NotConnected(DWRPError):
    pass


class AnchorOffSupport(DWRPError):
    pass


class CapacityTooTight(DWRPError):
    pass


class TooLarge(DWRPError):
    """A search space or table exceeded its configured limit."""


class InternalError(DWRPError):
    """A solver produced a witness that failed re-validation."""


@dataclass(frozen=True)
class Arc:
    tail: int
    head: int
    weight: int
    capacity: Optional[int]  # None means unbounded


@dataclass(frozen=True)
class Instance:
    n: int
    arcs: Tuple[Arc, ...]
    waypoints: frozenset
    budget: Optional[int] = None
    multiarc: bool = False

    def __post_init__(self):
        object.__setattr__(self, "arcs", tuple(self.arcs))
        object.__setattr__(self, "waypoints", frozenset(self.waypoints))
        for v in self.waypoints:
            if not 0 <= v < self.n:
                raise SemanticError(f"waypoint {v} out of range")
        seen = set()
        for a in self.arcs:
            if not (0 <= a.tail < self.n and 0 <= a.head < self.n):
                raise SemanticError(f"arc ({a.tail},{a.head}) has a vertex out of range")
            if a.tail == a.head:
                raise SemanticError(f"self-loop at {a.tail}")
            # weight-0 arcs only appear in internally built gadgets
            if a.weight < 0:
                raise SemanticError("negative weight")
            if a.capacity is not None and a.capacity < 1:
                raise SemanticError("capacity must be at least 1")
            if not self.multiarc:
                if (a.tail, a.head) in seen:
                    raise SemanticError(f"duplicate arc ({a.tail},{a.head}) without multiarc")
                seen.add((a.tail, a.head))
        if self.budget is not None and self.budget < 0:
            raise SemanticError("negative budget")

    @property
    def m(self) -> int:
        return len(self.arcs)

    def cap(self, i: int) -> int:
        """Finite capacity of arc i; unbounded materializes as n."""
        c = self.arcs[i].capacity
        return self.n if c is None else c

    def out_arcs(self) -> List[List[int]]:
        out: List[List[int]] = [[] for _ in range(self.n)]
        for i, a in enumerate(self.arcs):
            out[a.tail].append(i)
        return out

    def in_arcs(self) -> List[List[int]]:
        inc: List[List[int]] = [[] for _ in range(self.n)]
        for i, a in enumerate(self.arcs):
            inc[a.head].append(i)
        return inc

    def with_budget(self, budget: Optional[int]) -> "Instance":
        return Instance(self.n, self.arcs, self.waypoints, budget, self.multiarc)

    def canonical(self) -> "Instance":
        order = sorted(range(self.m), key=lambda i: (self.arcs[i].tail, self.arcs[i].head, i))
        return Instance(self.n, tuple(self.arcs[i] for i in order), self.waypoints, self.budget, self.multiarc)

    def check_strict(self) -> None:
        """Invariants required of user-supplied instances."""
        if len(self.waypoints) < 2:
            raise SemanticError("at least two waypoints are required")
        for a in self.arcs:
            if a.weight < 1:
                raise SemanticError(f"arc ({a.tail},{a.head}) has weight {a.weight}, must be >= 1")


def make_instance(n: int, arcs: Iterable[Sequence], waypoints: Iterable[int],
                  budget: Optional[int] = None, multiarc: bool = False) -> Instance:
    """Convenience builder taking (tail, head, weight, cap) tuples; cap None = unbounded."""
    built = []
    for a in arcs:
        t, h, w = a[0], a[1], a[2]
        c = a[3] if len(a) > 3 else None
        built.append(Arc(int(t), int(h), int(w), None if c is None else int(c)))
    return Instance(n, tuple(built), frozenset(waypoints), budget, multiarc)


# ---------------------------------------------------------------- walks

@dataclass(frozen=True)
class ClosedWalk:
    arcs: Tuple[int, ...]
    anchor: Optional[int] = None  # only meaningful for the empty walk

    def start(self, inst: Instance) -> Optional[int]:
        if self.arcs:
            return inst.arcs[self.arcs[0]].tail
        return self.anchor

    def vertices(self, inst: Instance) -> List[int]:
        """Vertex sequence v0 v1 ... v0 (just [anchor] for the empty walk)."""
        if not self.arcs:
            return [] if self.anchor is None else [self.anchor]
        seq = [inst.arcs[self.arcs[0]].tail]
        seq.extend(inst.arcs[i].head for i in self.arcs)
        return seq

    def cost(self, inst: Instance) -> int:
        return sum(inst.arcs[i].weight for i in self.arcs)

    def multiset(self) -> Dict[int, int]:
        ms: Dict[int, int] = defaultdict(int)
        for i in self.arcs:
            ms[i] += 1
        return dict(ms)


@dataclass(frozen=True)
class Violation:
    kind: str  # NotClosed | MissingWaypoint | CapacityExceeded | BudgetExceeded | UnknownArc
    detail: object = None


@dataclass
class ValidationReport:
    valid: bool
    cost: int
    violations: List[Violation] = field(default_factory=list)


def validate_walk(inst: Instance, walk: ClosedWalk, check_budget: bool = True) -> ValidationReport:
    violations: List[Violation] = []
    known = [i for i in walk.arcs if 0 <= i < inst.m]
    for i in walk.arcs:
        if not 0 <= i < inst.m:
            violations.append(Violation("UnknownArc", i))
    if len(known) != len(walk.arcs):
        return ValidationReport(False, sum(inst.arcs[i].weight for i in known), violations)
    arcs = walk.arcs
    for j in range(len(arcs)):
        a = inst.arcs[arcs[j]]
        b = inst.arcs[arcs[(j + 1) % len(arcs)]]
        if a.head != b.tail:
            violations.append(Violation("NotClosed", j))
            break
    visited = set(inst.arcs[i].tail for i in arcs)
    if not arcs and walk.anchor is not None:
        visited.add(walk.anchor)
    for v in sorted(inst.waypoints - visited):
        violations.append(Violation("MissingWaypoint", v))
    for i, c in sorted(walk.multiset().items()):
        if c > inst.cap(i):
            violations.append(Violation("CapacityExceeded", i))
    cost = walk.cost(inst)
    if check_budget and inst.budget is not None and cost > inst.budget:
        violations.append(Violation("BudgetExceeded", cost))
    return ValidationReport(not violations, cost, violations)


def _check_closed(inst: Instance, walk: ClosedWalk) -> None:
    arcs = walk.arcs
    for j in range(len(arcs)):
        if inst.arcs[arcs[j]].head != inst.arcs[arcs[(j + 1) % len(arcs)]].tail:
            raise NotClosed(f"arc position {j} does not continue the walk")


def cycle_decompose(inst: Instance, walk: ClosedWalk) -> List[ClosedWalk]:
    """Split a closed walk into simple directed cycles (arc multiset preserved)."""
    _check_closed(inst, walk)
    cycles: List[ClosedWalk] = []
    stack: List[int] = []          # arc indices of the current open path
    pos: Dict[int, int] = {}       # vertex -> position in the path where it was entered
    if not walk.arcs:
        return cycles
    start = inst.arcs[walk.arcs[0]].tail
    pos[start] = 0
    for i in walk.arcs:
        stack.append(i)
        h = inst.arcs[i].head
        if h in pos:
            p = pos[h]
            cyc = stack[p:]
            del stack[p:]
            for a in cyc:
                pos.pop(inst.arcs[a].head, None)
            pos[h] = p
            cycles.append(ClosedWalk(tuple(cyc)))
        else:
            pos[h] = len(stack)
    return cycles


def multiset_to_walk(inst: Instance, ms: Dict[int, int], anchor: int) -> ClosedWalk:
    """Hierholzer assembly of a balanced, connected arc multiset into a closed walk at anchor."""
    ms = {i: c for i, c in ms.items() if c > 0}
    if not ms:
        return ClosedWalk((), anchor)
    bal = defaultdict(int)
    for i, c in ms.items():
        a = inst.arcs[i]
        bal[a.tail] += c
        bal[a.head] -= c
    if any(bal.values()):
        raise NotBalanced("in- and out-multiplicities differ")
    parent = {}

    def find(x):
        while parent.setdefault(x, x) != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i in ms:
        a = inst.arcs[i]
        parent[find(a.tail)] = find(a.head)
    roots = {find(v) for v in parent}
    if len(roots) > 1:
        raise NotConnected("support is not weakly connected")
    if anchor not in parent:
        raise AnchorOffSupport(f"anchor {anchor} not on the support")
    # deterministic: consume out-arcs in increasing index order
    out: Dict[int, List[int]] = defaultdict(list)
    for i in sorted(ms, reverse=True):
        out[inst.arcs[i].tail].extend([i] * ms[i])
    path: List[Tuple[int, Optional[int]]] = [(anchor, None)]
    circuit: List[int] = []
    while path:
        v, via = path[-1]
        if out[v]:
            i = out[v].pop()
            path.append((inst.arcs[i].head, i))
        else:
            path.pop()
            if via is not None:
                circuit.append(via)
    circuit.reverse()
    return ClosedWalk(tuple(circuit))


def arc_multiset(walk: ClosedWalk) -> Dict[int, int]:
    return walk.multiset()


# ---------------------------------------------------------------- shortest paths

@dataclass
class DistanceMatrix:
    dist: List[List[float]]
    pred: List[List[Optional[int]]]  # pred[s][v] = arc index entering v on a shortest s->v path

    def __call__(self, u: int, v: int) -> float:
        return self.dist[u][v]

    def path(self, u: int, v: int) -> List[int]:
        """Arc indices of a shortest u->v path (empty for u == v)."""
        if self.dist[u][v] == INF:
            raise ValueError(f"{v} unreachable from {u}")
        arcs: List[int] = []
        cur = v
        pred = self.pred[u]
        while cur != u:
            i = pred[cur]
            arcs.append(i)
            cur = self._tails[i]
        arcs.reverse()
        return arcs

    _tails: List[int] = field(default_factory=list, repr=False)


def dijkstra(inst: Instance, source: int, out: Optional[List[List[int]]] = None):
    out = out if out is not None else inst.out_arcs()
    dist = [INF] * inst.n
    pred: List[Optional[int]] = [None] * inst.n
    dist[source] = 0
    heap = [(0, source)]
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist[u]:
            continue
        for i in out[u]:
            a = inst.arcs[i]
            nd = d + a.weight
            if nd < dist[a.head]:
                dist[a.head] = nd
                pred[a.head] = i
                heapq.heappush(heap, (nd, a.head))
    return dist, pred


def metric_closure(inst: Instance) -> DistanceMatrix:
    out = inst.out_arcs()
    dist, pred = [], []
    for s in range(inst.n):
        d, p = dijkstra(inst, s, out)
        dist.append(d)
        pred.append(p)
    dm = DistanceMatrix(dist, pred)
    dm._tails = [a.tail for a in inst.arcs]
    return dm


# ---------------------------------------------------------------- text formats

def _cap_str(c: Optional[int]) -> str:
    return "inf" if c is None else str(c)


def parse_instance(text: str) -> Instance:
    n = None
    waypoints = None
    budget = None
    multiarc = False
    arcs: List[Arc] = []
    seen_magic = False
    pairs = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        key = tok[0]
        if not seen_magic:
            if tok != ["dwrp", "1"]:
                raise ParseError(lineno, "expected 'dwrp 1' header")
            seen_magic = True
            continue
        try:
            if key == "n":
                if len(tok) != 2:
                    raise ParseError(lineno, "n takes one integer")
                n = int(tok[1])
                if n < 1:
                    raise ParseError(lineno, "n must be positive")
            elif key == "waypoints":
                waypoints = [int(t) for t in tok[1:]]
            elif key == "budget":
                if len(tok) != 2:
                    raise ParseError(lineno, "budget takes one value")
                budget = None if tok[1] == "none" else int(tok[1])
            elif key == "multiarc":
                if tok[1:] != ["on"] or arcs:
                    raise ParseError(lineno, "'multiarc on' must precede all arcs")
                multiarc = True
            elif key == "arc":
                if len(tok) != 5:
                    raise ParseError(lineno, "arc takes tail head weight capacity")
                if n is None:
                    raise ParseError(lineno, "arc before n")
                t, h, w = int(tok[1]), int(tok[2]), int(tok[3])
                c = None if tok[4] == "inf" else int(tok[4])
                if not (0 <= t < n and 0 <= h < n):
                    raise SemanticError(f"line {lineno}: vertex out of range")
                if t == h:
                    raise SemanticError(f"line {lineno}: self-loop")
                if w < 1:
                    raise SemanticError(f"line {lineno}: weight must be >= 1")
                if c is not None and c < 1:
                    raise SemanticError(f"line {lineno}: capacity must be >= 1")
                if not multiarc and (t, h) in pairs:
                    raise SemanticError(f"line {lineno}: duplicate arc ({t},{h})")
                pairs.add((t, h))
                arcs.append(Arc(t, h, w, c))
            else:
                raise ParseError(lineno, f"unknown keyword {key!r}")
        except ValueError:
            raise ParseError(lineno, "malformed integer") from None
    if not seen_magic:
        raise ParseError(1, "empty input")
    if n is None:
        raise ParseError(0, "missing n")
    if waypoints is None:
        raise ParseError(0, "missing waypoints")
    if len(set(waypoints)) != len(waypoints):
        raise SemanticError("repeated waypoint")
    if any(not 0 <= v < n for v in waypoints):
        raise SemanticError("waypoint out of range")
    inst = Instance(n, tuple(arcs), frozenset(waypoints), budget, multiarc)
    inst.check_strict()
    return inst


def serialize_instance(inst: Instance) -> str:
    lines = ["dwrp 1", f"n {inst.n}", "waypoints " + " ".join(str(v) for v in sorted(inst.waypoints)),
             f"budget {'none' if inst.budget is None else inst.budget}"]
    if inst.multiarc:
        lines.append("multiarc on")
    for a in inst.canonical().arcs:
        lines.append(f"arc {a.tail} {a.head} {a.weight} {_cap_str(a.capacity)}")
    return "\n".join(lines) + "\n"


def format_solution(inst: Instance, cost: Optional[int], walk: Optional[ClosedWalk]) -> str:
    if cost is None or walk is None:
        return "INFEASIBLE\n"
    return f"COST {cost}\nWALK {' '.join(str(v) for v in walk.vertices(inst))}\n"


def parse_solution(inst: Instance, text: str) -> Optional[ClosedWalk]:
    """Read a solution file back into a walk; None for INFEASIBLE.

    Between consecutive vertices the cheapest unused-so-far arc is chosen, so parallel
    arcs are spread over their capacities when the vertex sequence alone is ambiguous.
    """
    walk_vs = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        if tok[0] == "INFEASIBLE":
            return None
        if tok[0] == "COST":
            continue
        if tok[0] == "WALK":
            try:
                walk_vs = [int(t) for t in tok[1:]]
            except ValueError:
                raise ParseError(lineno, "malformed vertex id") from None
        else:
            raise ParseError(lineno, f"unknown keyword {tok[0]!r}")
    if walk_vs is None:
        raise ParseError(0, "missing WALK line")
    if len(walk_vs) == 1:
        return ClosedWalk((), walk_vs[0])
    by_pair: Dict[Tuple[int, int], List[int]] = defaultdict(list)
    for i, a in enumerate(inst.arcs):
        by_pair[(a.tail, a.head)].append(i)
    for lst in by_pair.values():
        lst.sort(key=lambda i: (inst.arcs[i].weight, i))
    used: Dict[int, int] = defaultdict(int)
    arcs = []
    for u, v in zip(walk_vs, walk_vs[1:]):
        cands = by_pair.get((u, v))
        if not cands:
            raise SemanticError(f"no arc ({u},{v})")
        pick = next((i for i in cands if used[i] < inst.cap(i)), cands[0])
        used[pick] += 1
        arcs.append(pick)
    return ClosedWalk(tuple(arcs))
