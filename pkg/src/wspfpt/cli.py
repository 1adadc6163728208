"""Command-line front end: solve, check-td, gen, reduce, bench, dot."""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, field

from . import __version__
from .bench import loglog_slope, median_by_n, sweep, to_csv
from .dp import solve_instance
from .model import ParseError, WorkflowInstance, check_plan, parse_instance, serialize_instance
from .oracle import BudgetExceeded, GenParams, brute_force_solve, gen_random_instance
from .preprocess import NoInstance, contract_equalities
from .reductions import (
    ReductionError,
    brute_force_psi,
    brute_force_subtdag,
    gen_random_psi,
    parse_psi,
    parse_std,
    reduce_psi_to_subtdag,
    reduce_subtdag_to_wsp,
    serialize_psi,
    serialize_std,
)
from .treedecomp import (
    DecompositionError,
    parse_td,
    to_nice,
    validate_decomposition,
)

EXIT_SAT, EXIT_UNSAT, EXIT_USAGE, EXIT_DISAGREE = 0, 1, 2, 3

STRATEGY_FLAGS = {
    "auto": "auto",
    "min-degree": "min_degree",
    "min-fill": "min_fill",
    "exact": "exact_small",
}


class UsageError(Exception):
    pass


@dataclass
class RunReport:
    instance: dict
    outcome: str
    plan: dict[str, str] | None = None
    reason: str = ""
    oracle: str = "not run"
    stats: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    advisories: list[str] = field(default_factory=list)

    def text(self) -> str:
        inst = self.instance
        out = [self.outcome]
        if self.plan:
            out += [f"  {s} -> {u}" for s, u in self.plan.items()]
        if self.reason:
            out.append(f"reason: {self.reason}")
        out.append(
            "n={n} k={k} k'={supersteps} r={width} nodes={nodes}".format(**inst)
        )
        out += self.advisories
        out += [f"{key}={val}" for key, val in self.stats.items()]
        out += [f"time_{key}={val:.6f}" for key, val in self.timings.items()]
        out.append(f"oracle: {self.oracle}")
        return "\n".join(out)


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _load(path: str) -> WorkflowInstance:
    return parse_instance(_read(path))


def _emit(args, report_dict: dict, text: str):
    if getattr(args, "json", False):
        print(json.dumps(report_dict, indent=2, sort_keys=True))
    else:
        print(text)


# -- commands -----------------------------------------------------------------

def cmd_solve(args) -> int:
    inst = _load(args.instance)
    td = None
    if args.td:
        td = parse_td(_read(args.td), inst.users.names)
        problems = validate_decomposition(inst.n, sorted(inst.users.cover_arcs), td)
        if problems:
            raise UsageError("invalid tree decomposition: " + "; ".join(problems))
    out = solve_instance(inst, td, STRATEGY_FLAGS[args.strategy])
    stats = {}
    nodes = 0
    if out.stats is not None:
        s = out.stats
        nodes = s.nodes
        stats = {
            "leaf": s.leaf, "introduce": s.introduce, "forget": s.forget, "join": s.join,
            "max_states": s.max_states, "total_states": s.total_states,
        }
    report = RunReport(
        instance={"n": inst.n, "k": inst.k, "supersteps": out.supersteps, "width": out.width, "nodes": nodes},
        outcome="Sat" if out.sat else "Unsat",
        plan=inst.describe_plan(out.plan) if out.sat else None,
        reason=out.reason,
        stats=stats,
        timings=dict(out.timings),
        advisories=list(out.advisories),
    )
    code = EXIT_SAT if out.sat else EXIT_UNSAT
    if args.oracle:
        try:
            ref = brute_force_solve(inst, args.budget)
        except BudgetExceeded as exc:
            report.oracle = f"skipped ({exc})"
        else:
            agree = (ref is not None) == out.sat
            if ref is not None and check_plan(inst, ref):
                agree = False
            report.oracle = "agrees" if agree else (
                f"DISAGREES: brute force says {'Sat' if ref is not None else 'Unsat'}"
            )
            if not agree:
                code = EXIT_DISAGREE
    _emit(args, asdict(report), report.text())
    return code


def cmd_check_td(args) -> int:
    inst = _load(args.instance)
    td = parse_td(_read(args.td), inst.users.names)
    arcs = sorted(inst.users.cover_arcs)
    problems = validate_decomposition(inst.n, arcs, td)
    info: dict = {"valid": not problems, "problems": problems, "bags": len(td.bags)}
    if not problems and td.bags:
        ntd = to_nice(td)
        info.update(width=td.width(), nice_nodes=len(ntd.nodes), nice_counts=ntd.counts(), limit=4 * inst.n)
    lines = ["valid" if not problems else "invalid"] + [f"  {p}" for p in problems]
    if "width" in info:
        lines.append(f"width={info['width']} nice_nodes={info['nice_nodes']} (4n={info['limit']})")
    _emit(args, info, "\n".join(lines))
    return 0 if not problems else 1


def cmd_gen(args) -> int:
    if args.kind == "psi":
        try:
            psi = gen_random_psi(args.seed, args.pattern, args.host, plant=args.plant)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        text = serialize_psi(psi)
    else:
        params = GenParams(args.n, args.k, args.arc_density, args.auth_density, args.eq, args.neq, args.lt)
        try:
            text = serialize_instance(gen_random_instance(params, args.seed))
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    _write(args.output, text)
    return 0


def _write(path, text: str):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def cmd_reduce(args) -> int:
    text = _read(args.path)
    verdicts: dict[str, str] = {}

    def verdict(fn, obj):
        try:
            return "Yes" if fn(obj, args.budget) is not None else "No"
        except BudgetExceeded:
            return "skipped"

    try:
        if args.source == "psi":
            psi = parse_psi(text)
            st = reduce_psi_to_subtdag(psi)
            if args.oracle:
                verdicts["psi"] = verdict(brute_force_psi, psi)
        else:
            st = parse_std(text)
        if args.oracle:
            verdicts["subtdag"] = verdict(brute_force_subtdag, st)
        if args.to == "std":
            out = serialize_std(st)
        else:
            inst = reduce_subtdag_to_wsp(st)
            out = serialize_instance(inst)
            if args.oracle:
                verdicts["wsp"] = verdict(brute_force_solve, inst)
    except ReductionError as exc:
        raise UsageError(str(exc)) from None
    _write(args.output, out)
    if args.oracle:
        for key, val in verdicts.items():
            print(f"{key}: {val}", file=sys.stderr)
        if len({v for v in verdicts.values() if v != "skipped"}) > 1:
            return EXIT_DISAGREE
    return 0


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def cmd_bench(args) -> int:
    rows = sweep(args.k, args.r, args.n, args.reps, args.seed)
    _write(args.output, to_csv(rows))
    if len(set(args.n)) > 1:
        for k in args.k:
            for r in args.r:
                cell = [row for row in rows if row.k == k and row.r == r]
                ns, secs = median_by_n(cell)
                print(f"k={k} r={r} loglog_slope={loglog_slope(ns, secs):.3f}", file=sys.stderr)
    return 0


def cmd_dot(args) -> int:
    inst = _load(args.instance)
    cg = contract_equalities(inst)
    if isinstance(cg, NoInstance):
        print(f"no instance: {cg.reason}", file=sys.stderr)
        return EXIT_UNSAT
    sys.stdout.write(cg.to_dot(inst.step_names))
    return 0


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wspfpt", description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def budget_flag(sp):
        sp.add_argument(
            "--budget", type=int, default=None,
            help="brute-force search-space cap (default: $WSP_BUDGET or 10^8)",
        )

    s = sub.add_parser("solve", help="decide an instance and print a plan if one exists")
    s.add_argument("instance")
    s.add_argument("--td", help="tree decomposition of the Hasse diagram (s td format)")
    s.add_argument("--strategy", choices=sorted(STRATEGY_FLAGS), default="auto")
    s.add_argument("--oracle", action="store_true", help="cross-check with brute force")
    budget_flag(s)
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=cmd_solve)

    c = sub.add_parser("check-td", help="validate a tree decomposition against an instance")
    c.add_argument("instance")
    c.add_argument("td")
    c.add_argument("--json", action="store_true")
    c.set_defaults(func=cmd_check_td)

    g = sub.add_parser("gen", help="write a random instance")
    g.add_argument("--kind", choices=("wsp", "psi"), default="wsp")
    g.add_argument("--n", type=int, default=6, help="users")
    g.add_argument("--k", type=int, default=4, help="steps")
    g.add_argument("--arc-density", type=float, default=0.3)
    g.add_argument("--auth-density", type=float, default=0.6)
    g.add_argument("--eq", type=int, default=0)
    g.add_argument("--neq", type=int, default=0)
    g.add_argument("--lt", type=int, default=0)
    g.add_argument("--pattern", type=int, default=3, help="pattern vertices (psi)")
    g.add_argument("--host", type=int, default=6, help="host vertices (psi)")
    g.add_argument("--plant", action=argparse.BooleanOptionalAction, default=None,
                   help="force a Yes answer (psi); default lets the seed decide")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("reduce", help="run the psi -> std -> wsp reduction chain")
    r.add_argument("source", choices=("psi", "std"))
    r.add_argument("path")
    r.add_argument("--to", choices=("std", "wsp"), default="wsp")
    r.add_argument("--oracle", action="store_true", help="brute-force every stage and compare")
    budget_flag(r)
    r.add_argument("-o", "--output")
    r.set_defaults(func=cmd_reduce)

    b = sub.add_parser("bench", help="(k, r, n) sweep of the DP, CSV on stdout")
    b.add_argument("--k", type=_int_list, default=[4])
    b.add_argument("--r", type=_int_list, default=[2])
    b.add_argument("--n", type=_int_list, default=[50, 100, 200, 400])
    b.add_argument("--reps", type=int, default=3)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("-o", "--output")
    b.set_defaults(func=cmd_bench)

    d = sub.add_parser("dot", help="print the constraint graph on supersteps")
    d.add_argument("instance")
    d.set_defaults(func=cmd_dot)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "budget", None) is None and "WSP_BUDGET" in os.environ:
        try:
            args.budget = int(os.environ["WSP_BUDGET"])
        except ValueError:
            parser.error("WSP_BUDGET must be an integer")
    try:
        return args.func(args)
    except (ParseError, UsageError, DecompositionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
