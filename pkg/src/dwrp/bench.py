"""Run every applicable solver on a corpus and compare costs.

The report (costs only) is deterministic; wall times are kept apart so that two runs
with the same seed produce byte-identical reports.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence

from .colorcoding import EXHAUSTIVE, solve_k_occurrences
from .corpus import CorpusEntry
from .fes import solve_fes
from .oracle import Solution, Status, oracle_solve
from .structparams import UnderlyingGraph, feedback_edge_set, vertex_integrity
from .twdp import solve_twdp
from .vi import solve_vi

ALGOS = ("oracle", "fes", "vi", "twdp", "colorcoding")
FES_LIMIT = 3
VI_LIMIT = 3


@dataclass
class BenchRecord:
    name: str
    costs: Dict[str, str] = field(default_factory=dict)    # algo -> cost, "INF", or "-" (skipped)
    times: Dict[str, float] = field(default_factory=dict)
    stats: Dict[str, dict] = field(default_factory=dict)
    walks: Dict[str, object] = field(default_factory=dict)

    @property
    def agree(self) -> bool:
        vals = {v for v in self.costs.values() if v != "-"}
        return len(vals) <= 1


def _cost(sol: Solution) -> str:
    return "INF" if sol.status is Status.INFEASIBLE else str(sol.cost)


def run_instance(entry: CorpusEntry, algos: Sequence[str] = ALGOS, seed: int = 0) -> BenchRecord:
    inst = entry.instance.with_budget(None)
    rec = BenchRecord(entry.name)
    g = UnderlyingGraph.from_instance(inst)
    occurrences: Optional[int] = None

    def run(algo: str, fn) -> None:
        t0 = time.perf_counter()
        sol = fn()
        rec.times[algo] = time.perf_counter() - t0
        rec.costs[algo] = _cost(sol)
        rec.stats[algo] = sol.stats
        rec.walks[algo] = sol.walk

    for algo in algos:
        if algo == "oracle":
            run(algo, lambda: oracle_solve(inst))
            if rec.walks["oracle"] is not None:
                occurrences = len(rec.walks["oracle"].arcs)
        elif algo == "fes":
            if len(feedback_edge_set(g)) <= FES_LIMIT:
                run(algo, lambda: solve_fes(inst))
            else:
                rec.costs[algo] = "-"
        elif algo == "vi":
            mod = vertex_integrity(g, VI_LIMIT)
            if mod is not None:
                run(algo, lambda: solve_vi(inst, mod))
            else:
                rec.costs[algo] = "-"
        elif algo == "twdp":
            run(algo, lambda: solve_twdp(inst))
        elif algo == "colorcoding":
            k = occurrences if occurrences else max(1, len(inst.waypoints))
            run(algo, lambda: solve_k_occurrences(inst, k, EXHAUSTIVE, seed=seed))
        else:
            raise ValueError(f"unknown algorithm {algo!r}")
    return rec


def run_bench(entries: Iterable[CorpusEntry], algos: Sequence[str] = ALGOS, seed: int = 0,
              progress=None) -> List[BenchRecord]:
    out = []
    for j, e in enumerate(entries):
        out.append(run_instance(e, algos, seed))
        if progress is not None:
            progress(j, out[-1])
    return out


def format_report(records: Sequence[BenchRecord], algos: Sequence[str] = ALGOS) -> str:
    lines = ["instance " + " ".join(algos) + " agree"]
    for r in records:
        lines.append(" ".join([r.name] + [r.costs.get(a, "-") for a in algos] + ["yes" if r.agree else "NO"]))
    bad = sum(not r.agree for r in records)
    lines.append(f"# instances {len(records)} disagreements {bad}")
    return "\n".join(lines) + "\n"


def format_times(records: Sequence[BenchRecord], algos: Sequence[str] = ALGOS) -> str:
    lines = []
    for a in algos:
        ts = [r.times[a] for r in records if a in r.times]
        if ts:
            lines.append(f"# {a}: runs {len(ts)} total {sum(ts):.2f}s max {max(ts):.3f}s")
    return "\n".join(lines) + "\n"


__all__ = ["ALGOS", "BenchRecord", "format_report", "format_times", "run_bench", "run_instance"]
