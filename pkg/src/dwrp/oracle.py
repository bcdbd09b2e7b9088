"""Ground-truth solvers: Held-Karp over the waypoints and bounded multiplicity enumeration."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from .core import (INF, CapacityTooTight, ClosedWalk, Instance, InternalError, TooLarge,
                   metric_closure, multiset_to_walk, validate_walk)

DEFAULT_ENUM_NODES = 20_000_000


class Status(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    BUDGET_EXCEEDED = "budget_exceeded"


@dataclass
class Solution:
    status: Status
    cost: Optional[int] = None
    walk: Optional[ClosedWalk] = None
    stats: Dict = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.status is not Status.INFEASIBLE


def infeasible(**stats) -> Solution:
    return Solution(Status.INFEASIBLE, stats=dict(stats))


def finish(inst: Instance, walk: ClosedWalk, expected: Optional[int] = None, **stats) -> Solution:
    """Re-validate a witness and wrap it, applying the budget as a post-filter."""
    rep = validate_walk(inst, walk, check_budget=False)
    if not rep.valid:
        raise InternalError(f"witness failed validation: {rep.violations}")
    if expected is not None and rep.cost != expected:
        raise InternalError(f"witness cost {rep.cost} differs from computed optimum {expected}")
    status = Status.OPTIMAL
    if inst.budget is not None and rep.cost > inst.budget:
        status = Status.BUDGET_EXCEEDED
    return Solution(status, rep.cost, walk, dict(stats))


def trivial_solution(inst: Instance) -> Solution:
    anchor = min(inst.waypoints) if inst.waypoints else 0
    return finish(inst, ClosedWalk((), anchor), 0)


def capacities_loose(inst: Instance) -> bool:
    k = len(inst.waypoints)
    return all(a.capacity is None or a.capacity >= k for a in inst.arcs)


# ---------------------------------------------------------------- Held-Karp

def solve_held_karp(inst: Instance) -> Solution:
    if not capacities_loose(inst):
        raise CapacityTooTight("some capacity is below |W|")
    if len(inst.waypoints) <= 1:
        return trivial_solution(inst)
    dm = metric_closure(inst)
    ws = sorted(inst.waypoints)
    w0, rest = ws[0], ws[1:]
    r = len(rest)
    full = (1 << r) - 1
    dp = [[INF] * r for _ in range(1 << r)]
    par = [[-1] * r for _ in range(1 << r)]
    for j, w in enumerate(rest):
        dp[1 << j][j] = dm(w0, w)
    for mask in range(1, 1 << r):
        row = dp[mask]
        for j in range(r):
            cur = row[j]
            if cur == INF or not mask >> j & 1:
                continue
            dj = dm.dist[rest[j]]
            for t in range(r):
                if mask >> t & 1:
                    continue
                nd = cur + dj[rest[t]]
                nm = mask | 1 << t
                if nd < dp[nm][t]:
                    dp[nm][t] = nd
                    par[nm][t] = j
    best, last = INF, -1
    for j in range(r):
        c = dp[full][j] + dm(rest[j], w0)
        if c < best:
            best, last = c, j
    if best == INF:
        return infeasible()
    order = []
    mask, j = full, last
    while j != -1:
        order.append(rest[j])
        mask, j = mask & ~(1 << j), par[mask][j]
    order.reverse()
    tour = [w0] + order + [w0]
    arcs: List[int] = []
    for u, v in zip(tour, tour[1:]):
        arcs.extend(dm.path(u, v))
    return finish(inst, ClosedWalk(tuple(arcs)), int(best), method="held_karp")


# ---------------------------------------------------------------- enumeration

def _lower_bound(inst: Instance) -> int:
    """Cheap valid bound: every waypoint needs an entering and a leaving arc."""
    inc = inst.in_arcs()
    out = inst.out_arcs()
    lb_in = lb_out = 0
    for w in inst.waypoints:
        lb_in += min((inst.arcs[i].weight for i in inc[w]), default=0)
        lb_out += min((inst.arcs[i].weight for i in out[w]), default=0)
    lb = max(lb_in, lb_out)
    if len(inst.waypoints) <= 12:
        relaxed = Instance(inst.n, tuple(a.__class__(a.tail, a.head, a.weight, None) for a in inst.arcs),
                           inst.waypoints, None, inst.multiarc)
        hk = solve_held_karp(relaxed)
        if hk.status is Status.INFEASIBLE:
            return -1
        lb = max(lb, hk.cost)
    return lb


def solve_enumeration(inst: Instance, max_nodes: int = DEFAULT_ENUM_NODES,
                      max_total: Optional[int] = None) -> Solution:
    """Exact search over arc multiplicity vectors.

    Vertices are processed in BFS order; at each vertex the still-free incident arcs are
    assigned so that the vertex balances. The search runs under an increasing cost
    threshold (IDA*-style) so the first threshold that admits a feasible vector yields
    the optimum. `max_total` restricts to vectors with at most that many arc occurrences.
    """
    W = inst.waypoints
    if len(W) <= 1:
        return trivial_solution(inst)
    lb0 = _lower_bound(inst)
    if lb0 < 0:
        return infeasible(method="enumeration")
    n = inst.n
    kW = len(W)
    bound = [min(inst.cap(i), kW) for i in range(inst.m)]
    if max_total is not None:
        bound = [min(b, max_total) for b in bound]
    adj = [set() for _ in range(n)]
    for a in inst.arcs:
        adj[a.tail].add(a.head)
        adj[a.head].add(a.tail)
    w0 = min(W)
    order, seen = [], {w0}
    queue = [w0]
    while queue:
        v = queue.pop(0)
        order.append(v)
        for u in sorted(adj[v]):
            if u not in seen:
                seen.add(u)
                queue.append(u)
    if not W <= seen:
        return infeasible(method="enumeration")
    pos = {v: i for i, v in enumerate(order)}
    steps = len(order)
    new_in: List[List[int]] = [[] for _ in range(steps)]
    new_out: List[List[int]] = [[] for _ in range(steps)]
    assigned_at = [0] * inst.m
    for i, a in enumerate(inst.arcs):
        if a.tail not in pos:
            bound[i] = 0  # other component, never usable together with w0
            continue
        pt, ph = pos[a.tail], pos[a.head]
        if pt < ph:
            new_out[pt].append(i)
            assigned_at[i] = pt
        else:
            new_in[ph].append(i)
            assigned_at[i] = ph
    for lst in new_in + new_out:
        lst.sort(key=lambda i: (inst.arcs[i].weight, i))
    # remaining (unassigned after step s) capacities and cheapest arcs per vertex
    rem_in = [[0] * (steps + 1) for _ in range(n)]
    rem_out = [[0] * (steps + 1) for _ in range(n)]
    min_in = [[INF] * (steps + 1) for _ in range(n)]
    min_out = [[INF] * (steps + 1) for _ in range(n)]
    for i, a in enumerate(inst.arcs):
        s_at = assigned_at[i]
        for s in range(s_at):
            rem_in[a.head][s] += bound[i]
            rem_out[a.tail][s] += bound[i]
            min_in[a.head][s] = min(min_in[a.head][s], a.weight)
            min_out[a.tail][s] = min(min_out[a.tail][s], a.weight)
    wlist = sorted(W, key=lambda v: pos[v])
    weights = [a.weight for a in inst.arcs]
    heads = [a.head for a in inst.arcs]
    tails = [a.tail for a in inst.arcs]

    x = [0] * inst.m
    inflow = [0] * n
    outflow = [0] * n
    state = {"nodes": 0, "best": None, "best_x": None, "next": INF, "thr": 0, "total": 0}

    def bound_rest(s: int) -> int:
        # after step s is complete: waypoints later in the order still lacking flow
        li = lo = 0
        for w in wlist:
            if pos[w] <= s:
                continue
            if inflow[w] == 0:
                li += min_in[w][s]
            if outflow[w] == 0:
                lo += min_out[w][s]
        return max(li, lo)

    def leaf(cost: int) -> None:
        parent = list(range(n))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        used = False
        for i in range(inst.m):
            if x[i]:
                used = True
                parent[find(tails[i])] = find(heads[i])
        if not used:
            return
        r = find(w0)
        for i in range(inst.m):
            if x[i] and find(tails[i]) != r:
                return
        if state["best"] is None or cost < state["best"]:
            state["best"] = cost
            state["best_x"] = list(x)

    def step(s: int, cost: int) -> None:
        state["nodes"] += 1
        if state["nodes"] > max_nodes:
            raise TooLarge(f"enumeration exceeded {max_nodes} search nodes")
        if s == steps:
            leaf(cost)
            return
        v = order[s]
        ins, outs = new_in[s], new_out[s]
        need_visit = v in W
        out_cap = [0] * (len(outs) + 1)
        for j in range(len(outs) - 1, -1, -1):
            out_cap[j] = out_cap[j + 1] + bound[outs[j]]

        def assign_in(j: int, c: int, total_in: int) -> None:
            if j == len(ins):
                through = inflow[v] + total_in
                if need_visit and through == 0:
                    return
                req = through - outflow[v]
                if req < 0 or req > out_cap[0]:
                    return
                assign_out(0, c, req)
                return
            i = ins[j]
            t = tails[i]
            w = weights[i]
            for val in range(bound[i] + 1):
                nc = c + w * val
                if nc > state["thr"]:
                    if nc < state["next"]:
                        state["next"] = nc
                    break
                if max_total is not None and state["total"] + val > max_total:
                    break
                x[i] = val
                outflow[t] += val
                state["total"] += val
                assign_in(j + 1, nc, total_in + val)
                state["total"] -= val
                outflow[t] -= val
            x[i] = 0

        def assign_out(j: int, c: int, req: int) -> None:
            if j == len(outs):
                finish_step(c)
                return
            i = outs[j]
            h = heads[i]
            w = weights[i]
            lo = max(0, req - out_cap[j + 1])
            hi = min(bound[i], req)
            for val in range(lo, hi + 1):
                nc = c + w * val
                if nc > state["thr"]:
                    if nc < state["next"]:
                        state["next"] = nc
                    break
                if max_total is not None and state["total"] + val > max_total:
                    break
                x[i] = val
                inflow[h] += val
                state["total"] += val
                assign_out(j + 1, nc, req - val)
                state["total"] -= val
                inflow[h] -= val
            x[i] = 0

        def finish_step(c: int) -> None:
            for u in adj[v]:
                if pos[u] > s:
                    if inflow[u] + rem_in[u][s] < outflow[u] or outflow[u] + rem_out[u][s] < inflow[u]:
                        return
            for w in wlist:
                if pos[w] > s and inflow[w] == 0 and rem_in[w][s] == 0:
                    return
            f = c + bound_rest(s)
            if f > state["thr"]:
                if f < state["next"]:
                    state["next"] = f
                return
            step(s + 1, c)

        assign_in(0, cost, 0)

    thr = lb0
    while True:
        state["thr"] = thr
        state["next"] = INF
        step(0, 0)
        if state["best"] is not None:
            break
        if state["next"] == INF:
            return infeasible(method="enumeration", nodes=state["nodes"])
        thr = state["next"]
    ms = {i: c for i, c in enumerate(state["best_x"]) if c}
    walk = multiset_to_walk(inst, ms, w0)
    return finish(inst, walk, state["best"], method="enumeration", nodes=state["nodes"])


def oracle_solve(inst: Instance, cross_check: bool = False,
                 max_nodes: int = DEFAULT_ENUM_NODES) -> Solution:
    """Held-Karp when capacities are loose, enumeration otherwise."""
    if capacities_loose(inst):
        sol = solve_held_karp(inst)
        if cross_check:
            other = solve_enumeration(inst, max_nodes=max_nodes)
            if other.cost != sol.cost:
                raise InternalError(f"oracle disagreement: held-karp {sol.cost}, enumeration {other.cost}")
        return sol
    return solve_enumeration(inst, max_nodes=max_nodes)
