"""Generators for the capacitated dominating set reduction, its gadgets, and random instances.

Vertices of generated instances get stable names of the form "<gadget>.<role>";
subdivision vertices on the edge a-b of a gadget are "<gadget>.<a>-<b>.1" and ".2"
(numbered from a). Every arc has weight 1 and, unless said otherwise, no capacity limit.
"""
from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple

from .core import DWRPError, ClosedWalk, Instance, ParseError, TooLarge, make_instance


class InvalidCDSWitness(DWRPError):
    pass


# ---------------------------------------------------------------- CDS instances

@dataclass
class CDSInstance:
    n: int
    edges: List[Tuple[int, int]]
    capacity: Dict[int, int]
    k: int

    def __post_init__(self):
        self.edges = sorted({(min(u, v), max(u, v)) for u, v in self.edges})
        for u, v in self.edges:
            if u == v or not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"bad edge {u} {v}")
        deg = self.degrees()
        for u in range(self.n):
            c = self.capacity.get(u)
            # an isolated vertex can only dominate itself; it still gets capacity 1
            if c is None or not 1 <= c <= max(1, deg[u]):
                raise ValueError(f"capacity of {u} must lie in [1, max(1, deg)] = [1, {max(1, deg[u])}]")
        if not 0 <= self.k <= self.n:
            raise ValueError("k must lie in [0, n]")

    def degrees(self) -> List[int]:
        deg = [0] * self.n
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg

    def neighbors(self) -> List[Set[int]]:
        nb: List[Set[int]] = [set() for _ in range(self.n)]
        for u, v in self.edges:
            nb[u].add(v)
            nb[v].add(u)
        return nb


def parse_cds(text: str) -> CDSInstance:
    n = k = None
    cap: Dict[int, int] = {}
    edges = []
    lines = [(i + 1, ln.split("#", 1)[0].strip()) for i, ln in enumerate(text.splitlines())]
    lines = [(i, ln) for i, ln in lines if ln]
    if not lines or lines[0][1].split() != ["cds", "1"]:
        raise ParseError(lines[0][0] if lines else 1, "expected header 'cds 1'")
    for no, ln in lines[1:]:
        tok = ln.split()
        try:
            if tok[0] == "n" and len(tok) == 2:
                n = int(tok[1])
            elif tok[0] == "k" and len(tok) == 2:
                k = int(tok[1])
            elif tok[0] == "cap" and len(tok) == 3:
                cap[int(tok[1])] = int(tok[2])
            elif tok[0] == "edge" and len(tok) == 3:
                edges.append((int(tok[1]), int(tok[2])))
            else:
                raise ParseError(no, f"unrecognized line {ln!r}")
        except ValueError:
            raise ParseError(no, "expected integers") from None
    if n is None or k is None:
        raise ParseError(lines[-1][0], "missing 'n' or 'k'")
    try:
        return CDSInstance(n, edges, cap, k)
    except ValueError as e:
        raise ParseError(lines[-1][0], str(e)) from None


def serialize_cds(cds: CDSInstance) -> str:
    out = ["cds 1", f"n {cds.n}"]
    out += [f"cap {u} {cds.capacity[u]}" for u in range(cds.n)]
    out += [f"edge {u} {v}" for u, v in cds.edges]
    out.append(f"k {cds.k}")
    return "\n".join(out) + "\n"


def domination_mapping(cds: CDSInstance, S: Sequence[int]) -> Optional[Dict[int, int]]:
    """Assignment of every vertex outside S to a neighbor in S within capacities, if one exists."""
    import networkx as nx

    S = set(S)
    rest = [v for v in range(cds.n) if v not in S]
    if not rest:
        return {}
    nb = cds.neighbors()
    g = nx.DiGraph()
    for v in rest:
        g.add_edge("src", ("v", v), capacity=1)
        for s in sorted(nb[v] & S):
            g.add_edge(("v", v), ("s", s), capacity=1)
    for s in S:
        g.add_edge(("s", s), "dst", capacity=cds.capacity[s])
    if "dst" not in g:
        return None
    value, flow = nx.maximum_flow(g, "src", "dst")
    if value < len(rest):
        return None
    f = {}
    for v in rest:
        for (_, s), amount in flow[("v", v)].items():
            if amount:
                f[v] = s
    return f


def cds_brute_force(cds: CDSInstance, limit: int = 20) -> Tuple[bool, Optional[Tuple[Tuple[int, ...], Dict[int, int]]]]:
    if cds.n > limit:
        raise TooLarge(f"brute force over {cds.n} vertices")
    for size in range(cds.k + 1):
        for S in itertools.combinations(range(cds.n), size):
            f = domination_mapping(cds, S)
            if f is not None:
                return True, (S, f)
    return False, None


def check_cds_witness(cds: CDSInstance, S, f: Dict[int, int]) -> None:
    S = set(S)
    if len(S) > cds.k:
        raise InvalidCDSWitness(f"|S| = {len(S)} exceeds k = {cds.k}")
    nb = cds.neighbors()
    load: Dict[int, int] = {}
    for v in range(cds.n):
        if v in S:
            continue
        s = f.get(v)
        if s is None or s not in S or s not in nb[v]:
            raise InvalidCDSWitness(f"vertex {v} is not dominated by a neighbor in S")
        load[s] = load.get(s, 0) + 1
    for s, c in load.items():
        if c > cds.capacity[s]:
            raise InvalidCDSWitness(f"vertex {s} dominates {c} > c({s}) = {cds.capacity[s]} vertices")


# ---------------------------------------------------------------- gadgets

@dataclass
class GadgetFragment:
    vertices: List[str]
    arcs: List[Tuple[str, str, Optional[int]]]   # (tail, head, capacity); weight is always 1
    terminals: Set[str]
    ports: Dict[str, str]
    paths: Dict[str, List[str]] = field(default_factory=dict)

    def to_instance(self) -> Tuple[Instance, Dict[str, int]]:
        ids = {v: i for i, v in enumerate(self.vertices)}
        inst = make_instance(len(ids), [(ids[a], ids[b], 1, c) for a, b, c in self.arcs],
                             [ids[t] for t in self.terminals])
        return inst, ids


def gen_force_gadget(p: int, name: str = "F") -> GadgetFragment:
    if p < 1:
        raise ValueError("p must be at least 1")
    u_in, u_out, w = f"{name}.u_in", f"{name}.u_out", f"{name}.w"
    vs = [f"{name}.v{i}" for i in range(1, p + 1)]
    arcs = []
    for v in vs:
        arcs.append((u_in, v, None))
        arcs.append((v, w, None))
    arcs.append((w, u_out, p))
    return GadgetFragment([u_in, u_out, w] + vs, arcs, set(vs), {"u_in": u_in, "u_out": u_out})


_SPINE = ["s_in", "e", "f", "b", "a", "x_in"] + [f"w{i}" for i in range(1, 10)] + ["y_out", "d", "c", "h", "g", "t_out"]
_CHORDS = [("f", "w3"), ("w1", "w6"), ("w4", "w9"), ("w7", "h")]
_ONE_WAY = {("s_in", "e"), ("e", "f"), ("f", "b"), ("b", "z"), ("z", "c"), ("c", "h"), ("h", "g"),
            ("g", "t_out"), ("x_in", "w1"), ("w9", "y_out"), ("w1", "w6"), ("w4", "w9"), ("w3", "w4"),
            ("w6", "w7")}
_R1 = list(_SPINE)
_R2 = ["s_in", "e", "f", "w3", "w2", "w1", "w6", "w5", "w4", "w9", "w8", "w7", "h", "g", "t_out"]
_P = ["x_in", "a", "b", "z", "c", "d", "y_out"]


def gen_cover_gadget(zid: str = "z", name: str = "E") -> GadgetFragment:
    """Cover gadget around the shared terminal `zid`, with named paths R1, R2 and P."""
    raw = list(zip(_SPINE, _SPINE[1:])) + _CHORDS + [("b", "z"), ("z", "c")]

    def vname(role: str) -> str:
        return zid if role == "z" else f"{name}.{role}"

    vertices = [vname(r) for r in _SPINE] + [zid]
    arcs: List[Tuple[str, str, Optional[int]]] = []
    sub: Dict[Tuple[str, str], List[str]] = {}
    for a, b in raw:
        s1, s2 = f"{name}.{a}-{b}.1", f"{name}.{a}-{b}.2"
        vertices += [s1, s2]
        chain = [vname(a), s1, s2, vname(b)]
        sub[(a, b)] = chain
        sub[(b, a)] = chain[::-1]
        for t, h in zip(chain, chain[1:]):
            arcs.append((t, h, None))
        if (a, b) not in _ONE_WAY:
            for t, h in zip(chain[::-1], chain[::-1][1:]):
                arcs.append((t, h, None))

    def expand(roles: List[str]) -> List[str]:
        out = [vname(roles[0])]
        for a, b in zip(roles, roles[1:]):
            out += sub[(a, b)][1:]
        return out

    terminals = {vname(r) for r in _SPINE} | {zid}
    ports = {"s_in": vname("s_in"), "t_out": vname("t_out"), "x_in": vname("x_in"),
             "y_out": vname("y_out"), "z_io": zid}
    return GadgetFragment(vertices, arcs, terminals, ports,
                          {"R1": expand(_R1), "R2": expand(_R2), "P": expand(_P)})


# ---------------------------------------------------------------- the reduction

class _Builder:
    def __init__(self):
        self.names: List[str] = []
        self.index: Dict[str, int] = {}
        self.arcs: List[Tuple[str, str, Optional[int]]] = []
        self.terminals: Set[str] = set()

    def vertex(self, name: str, terminal: bool = False) -> str:
        if name not in self.index:
            self.index[name] = len(self.names)
            self.names.append(name)
        if terminal:
            self.terminals.add(name)
        return name

    def arc(self, a: str, b: str, cap: Optional[int] = None) -> None:
        self.arcs.append((a, b, cap))

    def add(self, frag: GadgetFragment) -> None:
        for v in frag.vertices:
            self.vertex(v, v in frag.terminals)
        self.arcs.extend(frag.arcs)


@dataclass
class Reduction:
    instance: Instance
    ids: Dict[str, int]
    terminals: int
    cover_paths: Dict[str, Dict[str, List[str]]]   # gadget name -> its R1/R2/P paths
    selection: GadgetFragment
    auxiliary: GadgetFragment


def reduction_budget(cds: CDSInstance) -> int:
    return 132 * len(cds.edges) + 69 * cds.n + 3 * cds.k + 12


def build_cds_reduction(cds: CDSInstance) -> Reduction:
    E, V, k = cds.edges, cds.n, cds.k
    bld = _Builder()
    sel = gen_force_gadget(k + 1, "S")
    aux = gen_force_gadget(2 * len(E) + V + 1, "A")
    bld.add(sel)
    bld.add(aux)
    x = bld.vertex("x")
    bld.arc(x, aux.ports["u_in"])
    x1, x2, x3 = bld.vertex("x1", True), bld.vertex("x2", True), bld.vertex("x3")
    bld.arc(aux.ports["u_out"], x2)
    bld.arc(x2, x3)
    bld.arc(x3, sel.ports["u_in"])
    bld.arc(sel.ports["u_out"], x1)
    bld.arc(x1, x)
    paths: Dict[str, Dict[str, List[str]]] = {}
    for u in range(V):
        z, c, d = bld.vertex(f"z{u}", True), bld.vertex(f"c{u}"), bld.vertex(f"d{u}")
        g = gen_cover_gadget(z, f"E{u}")
        bld.add(g)
        paths[f"E{u}"] = g.paths
        bld.arc(sel.ports["u_out"], g.ports["x_in"])
        bld.arc(g.ports["y_out"], c)
        bld.arc(c, d, cds.capacity[u])
        bld.arc(c, sel.ports["u_in"])
        bld.arc(aux.ports["u_out"], g.ports["s_in"])
        bld.arc(g.ports["t_out"], x)
    for a, b in E:
        for u, v in ((a, b), (b, a)):
            g = gen_cover_gadget(f"z{v}", f"E{u},{v}")
            bld.add(g)
            paths[f"E{u},{v}"] = g.paths
            bld.arc(f"d{u}", g.ports["x_in"])
            bld.arc(g.ports["y_out"], f"c{u}")
            bld.arc(aux.ports["u_out"], g.ports["s_in"])
            bld.arc(g.ports["t_out"], x)
    ids = bld.index
    inst = make_instance(len(bld.names), [(ids[a], ids[b], 1, cap) for a, b, cap in bld.arcs],
                         [ids[t] for t in bld.terminals], budget=reduction_budget(cds))
    return Reduction(inst, dict(ids), len(bld.terminals), paths, sel, aux)


def gen_cds_reduction(cds: CDSInstance) -> Instance:
    return build_cds_reduction(cds).instance


def build_witness_walk(cds: CDSInstance, S, f: Dict[int, int],
                       red: Optional[Reduction] = None) -> ClosedWalk:
    """Closed walk of cost exactly the budget built from a capacitated dominating set."""
    check_cds_witness(cds, S, f)
    S = sorted(set(S))
    f = {v: s for v, s in f.items() if v not in S}
    if len(S) < cds.k:
        # extra selected vertices cover their own z; they need not dominate anything
        extra = [v for v in range(cds.n) if v not in S][: cds.k - len(S)]
        S = sorted(S + extra)
        f = {v: s for v, s in f.items() if v not in S}
    if red is None:
        red = build_cds_reduction(cds)
    dominated = {s: sorted(v for v, t in f.items() if t == s) for s in S}
    sel_free = [f"S.v{i}" for i in range(1, cds.k + 2)]
    aux_free = [f"A.v{i}" for i in range(1, 2 * len(cds.edges) + cds.n + 2)]
    used_p = set()

    seq: List[str] = ["S.u_in"]
    # first walk: one selection traversal per chosen vertex
    for s in S:
        seq += [sel_free.pop(0), "S.w", "S.u_out"]
        seq += red.cover_paths[f"E{s}"]["P"] + [f"c{s}"]
        used_p.add(f"E{s}")
        for v in dominated[s]:
            seq += [f"d{s}"] + red.cover_paths[f"E{s},{v}"]["P"] + [f"c{s}"]
            used_p.add(f"E{s},{v}")
        seq.append("S.u_in")
    # joining cycle, with the second walk spliced in at the auxiliary exit
    seq += [sel_free.pop(0), "S.w", "S.u_out", "x1", "x", "A.u_in", aux_free.pop(0), "A.w", "A.u_out"]
    for gname in sorted(red.cover_paths, key=lambda g: red.ids[red.cover_paths[g]["R1"][0]]):
        path = red.cover_paths[gname]["R2" if gname in used_p else "R1"]
        seq += path + ["x", "A.u_in", aux_free.pop(0), "A.w", "A.u_out"]
    seq += ["x2", "x3", "S.u_in"]
    assert not sel_free and not aux_free
    inst = red.instance
    lookup = {(a.tail, a.head): i for i, a in enumerate(inst.arcs)}
    ids = red.ids
    try:
        arcs = tuple(lookup[(ids[a], ids[b])] for a, b in zip(seq, seq[1:]))
    except KeyError as e:
        raise InvalidCDSWitness(f"walk uses a missing arc {e}") from None
    return ClosedWalk(arcs)


# ---------------------------------------------------------------- random instances

def gen_random(n: int, density: float = 0.3, weights: Tuple[int, int] = (1, 9),
               capacities: Optional[Tuple[int, int]] = None, unbounded_prob: float = 1.0,
               waypoints: Optional[int] = None, seed: int = 0, backbone: bool = True) -> Instance:
    """Seeded random instance; with `backbone` a random Hamiltonian cycle makes it strongly connected.

    Each arc is unbounded with probability `unbounded_prob`, otherwise its capacity is
    drawn from `capacities`.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    rng = random.Random(seed)
    arcs: Dict[Tuple[int, int], Tuple[int, Optional[int]]] = {}

    def draw() -> Tuple[int, Optional[int]]:
        w = rng.randint(*weights)
        cap = None
        if capacities is not None and rng.random() >= unbounded_prob:
            cap = rng.randint(*capacities)
        return w, cap

    if backbone:
        order = list(range(n))
        rng.shuffle(order)
        for a, b in zip(order, order[1:] + order[:1]):
            arcs[(a, b)] = draw()
    for a in range(n):
        for b in range(n):
            if a != b and (a, b) not in arcs and (density >= 1.0 or rng.random() < density):
                arcs[(a, b)] = draw()
    k = n if waypoints is None else max(2, min(n, waypoints))
    W = sorted(rng.sample(range(n), k))
    return make_instance(n, [(a, b, w, c) for (a, b), (w, c) in sorted(arcs.items())], W)


__all__ = ["CDSInstance", "GadgetFragment", "InvalidCDSWitness", "Reduction", "build_cds_reduction",
           "build_witness_walk", "cds_brute_force", "check_cds_witness", "domination_mapping",
           "gen_cds_reduction", "gen_cover_gadget", "gen_force_gadget", "gen_random", "parse_cds",
           "reduction_budget", "serialize_cds"]
