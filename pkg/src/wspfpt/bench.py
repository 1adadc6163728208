"""(k, r, n) sweeps of the DP solver on hierarchies of bounded treewidth."""
from __future__ import annotations

import csv
import io
import math
import random
import time
from dataclasses import asdict, dataclass

from .dp import solve
from .model import Constraint, Kind, UserPoset, WorkflowInstance
from .oracle import random_partial_ktree_arcs
from .preprocess import NoInstance, contract_equalities
from .treedecomp import decompose, to_nice

FIELDS = ("k", "r", "n", "rep", "seed", "width", "nodes", "sat", "max_states", "total_states", "seconds")


@dataclass
class BenchRow:
    k: int
    r: int
    n: int
    rep: int
    seed: int
    width: int
    nodes: int
    sat: bool
    max_states: int
    total_states: int
    seconds: float


def bench_instance(k: int, r: int, n: int, seed: int) -> WorkflowInstance:
    """Hierarchy of treewidth at most ``r``, half-dense authorization, a path of < and a few !=."""
    rng = random.Random(seed)
    arcs = random_partial_ktree_arcs(rng, n, r)
    users = UserPoset([f"u{i}" for i in range(n)], arcs)
    auth = tuple(frozenset(u for u in range(n) if rng.random() < 0.5) for _ in range(k))
    cons = [Constraint(Kind.LT, s, s + 1) for s in range(0, k - 1, 2)]
    cons += [Constraint(Kind.NEQ, s, s + 1) for s in range(1, k - 1, 2)]
    if k >= 3:
        cons.append(Constraint(Kind.NEQ, 0, k - 1))
    return WorkflowInstance(tuple(f"s{i}" for i in range(k)), users, auth, tuple(cons))


def run_cell(k: int, r: int, n: int, rep: int, seed: int) -> BenchRow:
    inst = bench_instance(k, r, n, seed)
    cg = contract_equalities(inst)
    assert not isinstance(cg, NoInstance)
    t0 = time.perf_counter()
    ntd = to_nice(decompose(n, sorted(inst.users.cover_arcs), "min_fill"))
    res = solve(cg, inst.users, ntd)
    secs = time.perf_counter() - t0
    return BenchRow(
        k, r, n, rep, seed, ntd.width(), len(ntd.nodes), res.sat,
        res.stats.max_states, res.stats.total_states, secs,
    )


def sweep(ks, rs, ns, reps: int = 1, seed: int = 0) -> list[BenchRow]:
    rows = []
    for k in ks:
        for r in rs:
            for n in ns:
                for rep in range(reps):
                    cell_seed = random.Random(f"{seed}:{k}:{r}:{n}:{rep}").randrange(2**31)
                    rows.append(run_cell(k, r, n, rep, cell_seed))
    return rows


def to_csv(rows: list[BenchRow]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=FIELDS, lineterminator="\n")
    w.writeheader()
    for row in rows:
        d = asdict(row)
        d["seconds"] = f"{row.seconds:.6f}"
        w.writerow(d)
    return buf.getvalue()


def loglog_slope(ns, secs) -> float:
    """Least-squares slope of log(seconds) against log(n)."""
    xs = [math.log(n) for n in ns]
    ys = [math.log(max(s, 1e-9)) for s in secs]
    mx, my = sum(xs) / len(xs), sum(ys) / len(ys)
    sxx = sum((x - mx) ** 2 for x in xs)
    if sxx == 0:
        raise ValueError("need at least two distinct n values")
    return sum((x - mx) * (y - my) for x, y in zip(xs, ys)) / sxx


def median_by_n(rows: list[BenchRow]) -> tuple[list[int], list[float]]:
    by: dict[int, list[float]] = {}
    for row in rows:
        by.setdefault(row.n, []).append(row.seconds)
    ns = sorted(by)
    meds = []
    for n in ns:
        s = sorted(by[n])
        meds.append(s[len(s) // 2])
    return ns, meds
