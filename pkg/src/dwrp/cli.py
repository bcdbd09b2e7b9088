"""Command line front end: solve, validate, params, gen, bench.

Results go to stdout; diagnostics go to stderr. Exit codes: 0 success, 1 invalid walk
(validate), 2 malformed input, 3 resource limit hit, 4 internal error.
"""
from __future__ import annotations

import argparse
import math
import signal
import sys
from typing import Optional, Sequence

from .core import (DWRPError, InternalError, ParseError, SemanticError, TooLarge, format_solution,
                   parse_instance, parse_solution, serialize_instance, validate_walk)
from .oracle import Status

EXIT_OK, EXIT_INVALID, EXIT_INPUT, EXIT_LIMIT, EXIT_INTERNAL = 0, 1, 2, 3, 4

# thresholds for --algo auto (predicted state-space sizes, see _predict)
AUTO_MAX_VI = 4
AUTO_MAX_FES = 6


class TimeLimit(DWRPError):
    pass


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _write(path: Optional[str], text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _diag(args, msg: str) -> None:
    if not getattr(args, "quiet", False):
        print(msg, file=sys.stderr)


# ---------------------------------------------------------------- params / auto

def compute_params(inst, vi_limit: int = AUTO_MAX_VI) -> dict:
    from .structparams import UnderlyingGraph, exact_tree_decomposition, feedback_edge_set, vertex_integrity

    g = UnderlyingGraph.from_instance(inst)
    td, exact = exact_tree_decomposition(g)
    mod = vertex_integrity(g, vi_limit)
    return {"n": inst.n, "m": inst.m, "waypoints": len(inst.waypoints),
            "fes": len(feedback_edge_set(g)),
            "vi": None if mod is None else mod.k, "modulator": None if mod is None else sorted(mod.M),
            "treewidth": td.width, "treewidth_exact": exact}


def _bell(n: int) -> int:
    row = [1]
    for _ in range(n):
        nxt = [row[-1]]
        for x in row:
            nxt.append(nxt[-1] + x)
        row = nxt
    return row[0]


def _predict(inst, p: dict) -> dict:
    """log2 of a rough state-space size per solver."""
    from .oracle import capacities_loose

    k = p["waypoints"]
    est = {}
    if capacities_loose(inst):
        est["oracle"] = k + 2 * math.log2(max(k, 2))
    else:
        est["oracle"] = inst.m * math.log2(k + 1)
    if p["fes"] <= AUTO_MAX_FES:
        est["fes"] = 2 * p["fes"] * math.log2(6) + 14 * max(p["fes"], 1)
    if p["vi"] is not None:
        kv = p["vi"]
        est["vi"] = 2 * kv * kv + kv * (kv + 2) * math.log2(max(kv, 2))
    t = p["treewidth"] + 1
    est["twdp"] = math.log2(_bell(t)) + 2 * t * math.log2(k + 1) + math.log2(max(inst.n, 2))
    return est


# ---------------------------------------------------------------- subcommands

def cmd_solve(args) -> int:
    inst = parse_instance(_read(args.input))
    algo = args.algo
    if algo == "auto":
        if args.k is not None or args.nu is not None or args.modulator is not None or args.exhaustive \
                or args.delta is not None:
            raise SemanticError("--algo auto takes no algorithm flags")
        p = compute_params(inst)
        est = _predict(inst, p)
        algo = min(sorted(est), key=lambda a: est[a])
        _diag(args, f"auto: chose {algo} (log2 estimates {', '.join(f'{a}={v:.1f}' for a, v in sorted(est.items()))})")
    sol = run_algorithm(inst, algo, args)
    if sol.status is Status.INFEASIBLE:
        _write(args.output, "INFEASIBLE\n")
        return EXIT_OK
    rep = validate_walk(inst, sol.walk, check_budget=False)
    if not rep.valid or rep.cost != sol.cost:
        raise InternalError(f"emitted walk failed re-validation: {rep.violations}")
    if sol.status is Status.BUDGET_EXCEEDED:
        _diag(args, f"optimum {sol.cost} exceeds budget {inst.budget}")
        _write(args.output, "INFEASIBLE\n")
        return EXIT_OK
    _write(args.output, format_solution(inst, sol.cost, sol.walk))
    return EXIT_OK


def run_algorithm(inst, algo: str, args):
    if algo == "oracle":
        from .oracle import oracle_solve
        return oracle_solve(inst)
    if algo == "fes":
        from .fes import solve_fes
        return solve_fes(inst)
    if algo == "vi":
        from .structparams import UnderlyingGraph, check_modulator, vertex_integrity, _modulator_for
        from .vi import solve_vi
        g = UnderlyingGraph.from_instance(inst)
        if args.modulator:
            M = [int(x) for x in args.modulator.split(",") if x.strip()]
            comps = g.components(M)
            k = max([len(M)] + [len(c) for c in comps])
            mod = _modulator_for(g, M, k)
            if not check_modulator(g, mod):
                raise SemanticError("invalid modulator")
        else:
            mod = vertex_integrity(g, inst.n)
        return solve_vi(inst, mod)
    if algo == "twdp":
        from .twdp import solve_twdp
        return solve_twdp(inst, nu=args.nu)
    if algo == "colorcoding":
        from .colorcoding import EXHAUSTIVE, RANDOMIZED, solve_k_occurrences
        if args.k is None:
            raise SemanticError("--algo colorcoding needs --k")
        mode = RANDOMIZED if args.delta is not None and not args.exhaustive else EXHAUSTIVE
        delta = args.delta if args.delta is not None else 0.01
        return solve_k_occurrences(inst, args.k, mode, seed=args.seed, delta=delta)
    raise SemanticError(f"unknown algorithm {algo!r}")


def cmd_validate(args) -> int:
    inst = parse_instance(_read(args.instance))
    walk = parse_solution(inst, _read(args.solution))
    if walk is None:
        print("INFEASIBLE")
        return EXIT_OK
    rep = validate_walk(inst, walk)
    if rep.valid:
        print(f"VALID {rep.cost}")
        return EXIT_OK
    print("INVALID")
    for v in rep.violations:
        print(f"{v.kind} {v.detail}", file=sys.stderr)
    return EXIT_INVALID


def cmd_params(args) -> int:
    inst = parse_instance(_read(args.input))
    p = compute_params(inst, args.vi_limit)
    vi = p["vi"] if p["vi"] is not None else f">{args.vi_limit}"
    mod = ",".join(map(str, p["modulator"])) if p["modulator"] is not None else "-"
    print(f"n {p['n']}")
    print(f"m {p['m']}")
    print(f"waypoints {p['waypoints']}")
    print(f"feedback_edge_number {p['fes']}")
    print(f"vertex_integrity {vi}")
    print(f"modulator {mod}")
    print(f"treewidth {p['treewidth']} {'exact' if p['treewidth_exact'] else 'heuristic'}")
    return EXIT_OK


def _fragment_text(frag) -> str:
    inst, ids = frag.to_instance()
    names = "".join(f"# {i} {name}\n" for name, i in sorted(ids.items(), key=lambda t: t[1]))
    return names + serialize_instance(inst)


def _pair(text: str):
    lo, hi = (int(x) for x in text.split(","))
    return lo, hi


def cmd_gen(args) -> int:
    from . import hardness
    if args.kind == "random":
        inst = hardness.gen_random(args.n, density=args.density, weights=_pair(args.weights),
                                   capacities=_pair(args.capacities) if args.capacities else None,
                                   unbounded_prob=args.unbounded_prob, waypoints=args.waypoints,
                                   seed=args.seed, backbone=not args.allow_disconnected)
        _write(args.output, serialize_instance(inst))
    elif args.kind == "force":
        _write(args.output, _fragment_text(hardness.gen_force_gadget(args.p)))
    elif args.kind == "cover":
        _write(args.output, _fragment_text(hardness.gen_cover_gadget()))
    elif args.kind == "cds-reduction":
        if not args.cds:
            raise SemanticError("gen cds-reduction needs a CDS input file")
        cds = hardness.parse_cds(_read(args.cds))
        red = hardness.build_cds_reduction(cds)
        names = "".join(f"# {i} {name}\n" for name, i in sorted(red.ids.items(), key=lambda t: t[1]))
        _write(args.output, names + serialize_instance(red.instance))
    return EXIT_OK


def cmd_bench(args) -> int:
    from .bench import ALGOS, format_report, format_times, run_bench
    from .corpus import builtin, load_dir
    algos = tuple(a for a in args.algos.split(",")) if args.algos else ALGOS
    entries = load_dir(args.corpus) if args.corpus else builtin(args.builtin, seed=args.seed)
    _diag(args, f"bench: {len(entries)} instances")
    records = run_bench(entries, algos, seed=args.seed)
    _write(args.output, format_report(records, algos))
    _diag(args, format_times(records, algos).rstrip())
    return EXIT_OK if all(r.agree for r in records) else EXIT_INVALID


# ---------------------------------------------------------------- argument parsing

def build_parser() -> argparse.ArgumentParser:
    def global_flags(suppress: bool) -> argparse.ArgumentParser:
        # subcommands repeat the global flags; their copies must not reset values given earlier
        dflt = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
        g = argparse.ArgumentParser(add_help=False)
        g.add_argument("--seed", type=int, default=dflt(0), help="random seed (default 0)")
        g.add_argument("--time-limit-ms", type=int, default=dflt(None), help="abort with exit 3 after this long")
        g.add_argument("--quiet", action="store_true", default=dflt(False), help="suppress diagnostics on stderr")
        return g

    common = global_flags(True)
    p = argparse.ArgumentParser(prog="dwrp", description=__doc__.splitlines()[0], parents=[global_flags(False)])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", parents=[common], help="solve an instance",
                       description="Solve an instance. --algo auto picks the solver with the smallest "
                                   "predicted state space (log2 estimates: oracle |W|+2log|W| with loose "
                                   "capacities else m log(|W|+1); fes 2k log 6 + 14k when k <= "
                                   f"{AUTO_MAX_FES}; vi 2k^2 + k(k+2) log k when vi <= {AUTO_MAX_VI}; "
                                   "twdp log Bell(t+1) + 2(t+1) log(|W|+1) + log n).")
    s.add_argument("input", nargs="?", default="-")
    s.add_argument("-o", "--output")
    s.add_argument("--algo", default="auto", choices=["auto", "oracle", "colorcoding", "fes", "vi", "twdp"])
    s.add_argument("--k", type=int, help="colorcoding: maximum number of arc occurrences")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--exhaustive", action="store_true", help="colorcoding: deterministic family (default)")
    g.add_argument("--delta", type=float, help="colorcoding: randomized with failure probability delta")
    s.add_argument("--nu", type=int, help="twdp: visit bound per vertex (default |W|)")
    s.add_argument("--modulator", help="vi: comma-separated modulator vertices")
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("validate", parents=[common], help="check a solution file against an instance")
    v.add_argument("instance")
    v.add_argument("solution")
    v.set_defaults(func=cmd_validate)

    q = sub.add_parser("params", parents=[common], help="structural parameters of an instance")
    q.add_argument("input", nargs="?", default="-")
    q.add_argument("--vi-limit", type=int, default=AUTO_MAX_VI, help="largest vertex integrity searched")
    q.set_defaults(func=cmd_params)

    gen = sub.add_parser("gen", parents=[common], help="generate instances")
    gen.add_argument("kind", choices=["random", "force", "cover", "cds-reduction"])
    gen.add_argument("cds", nargs="?", help="cds-reduction: CDS input file")
    gen.add_argument("-o", "--output")
    gen.add_argument("--n", type=int, default=6)
    gen.add_argument("--density", type=float, default=0.3)
    gen.add_argument("--weights", default="1,9", help="lo,hi")
    gen.add_argument("--capacities", default=None, help="lo,hi (omit for unbounded arcs)")
    gen.add_argument("--unbounded-prob", type=float, default=0.0)
    gen.add_argument("--waypoints", type=int, default=None)
    gen.add_argument("--allow-disconnected", action="store_true")
    gen.add_argument("--p", type=int, default=2, help="force: number of forced traversals")
    gen.set_defaults(func=cmd_gen)

    b = sub.add_parser("bench", parents=[common], help="run all solvers on a corpus and compare")
    b.add_argument("--corpus", help="directory of .dwrp files (default: built-in corpora)")
    b.add_argument("--builtin", default="all", choices=["a", "b", "all"])
    b.add_argument("--algos", help="comma-separated subset of oracle,fes,vi,twdp,colorcoding")
    b.add_argument("-o", "--output")
    b.set_defaults(func=cmd_bench)
    return p


def _on_alarm(signum, frame):
    raise TimeLimit("time limit reached")


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.time_limit_ms:
        signal.signal(signal.SIGALRM, _on_alarm)
        signal.setitimer(signal.ITIMER_REAL, args.time_limit_ms / 1000.0)
    try:
        return args.func(args)
    except (ParseError, SemanticError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (TooLarge, TimeLimit, RecursionError) as e:
        print(f"resource limit: {e}", file=sys.stderr)
        return EXIT_LIMIT
    except InternalError as e:
        print(f"internal error: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    except DWRPError as e:
        print(f"resource limit: {e}", file=sys.stderr)
        return EXIT_LIMIT
    finally:
        if args.time_limit_ms:
            signal.setitimer(signal.ITIMER_REAL, 0)


if __name__ == "__main__":
    sys.exit(main())


__all__ = ["main", "build_parser", "compute_params", "run_algorithm"]
