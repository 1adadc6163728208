"""Dynamic program over a nice tree decomposition of the user Hasse diagram.

A DP state assigns every superstep one label:

* ``None``         the step is not yet placed (outside T),
* an ``int`` user  the step runs on that bag user,
* a ``tuple``      the step runs on an already-forgotten user whose relation
                   to the bag users (ascending order) is given coordinatewise
                   as ``Rel`` values (0 = below, 1 = above, 2 = incomparable).

Tables are sparse: only states with a valid partial plan are stored, each
mapped to the witness it was derived from so a plan can be read back
top-down without re-solving.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .model import UserPoset, WorkflowInstance, check_plan, validate_instance
from .order import Rel
from .preprocess import ConstraintGraph, NoInstance, contract_equalities, expand_plan
from .treedecomp import (
    EXACT_LIMIT,
    NiceTreeDecomposition,
    TreeDecomposition,
    decompose,
    to_nice,
    validate_decomposition,
)

LT, GT, INC = int(Rel.LT), int(Rel.GT), int(Rel.INC)

State = tuple


class SolverError(RuntimeError):
    """Internal inconsistency: a produced plan failed the independent recheck."""


@dataclass
class Context:
    """Per-instance lookup tables shared by the node procedures."""

    k: int
    auth: list[bytearray]
    neq: list[set[int]]
    lt_out: list[set[int]]
    lt_in: list[set[int]]
    conflict: list[set[int]]
    less: object

    @classmethod
    def build(cls, cg: ConstraintGraph, poset: UserPoset) -> Context:
        k = cg.k
        auth = []
        for allowed in cg.auth:
            row = bytearray(poset.n)
            for u in allowed:
                row[u] = 1
            auth.append(row)
        neq = [set() for _ in range(k)]
        lt_out = [set() for _ in range(k)]
        lt_in = [set() for _ in range(k)]
        for a, b in cg.neq_edges:
            neq[a].add(b)
            neq[b].add(a)
        for a, b in cg.lt_arcs:
            lt_out[a].add(b)
            lt_in[b].add(a)
        conflict = [neq[x] | lt_out[x] | lt_in[x] for x in range(k)]
        return cls(k, auth, neq, lt_out, lt_in, conflict, poset.less)


def process_leaf(bag: tuple[int, ...], ctx: Context) -> dict[State, None]:
    """Every state whose placed steps all sit on bag users, checked directly."""
    k, less = ctx.k, ctx.less
    out: dict[State, None] = {}
    labels: list = [None] * k

    def extend(x: int):
        if x == k:
            out[tuple(labels)] = None
            return
        labels[x] = None
        extend(x + 1)
        for u in bag:
            if not ctx.auth[x][u]:
                continue
            ok = True
            for y in range(x):
                w = labels[y]
                if w is None:
                    continue
                if w == u and y in ctx.conflict[x]:
                    ok = False
                    break
                if y in ctx.lt_out[x] and not less(u, w):
                    ok = False
                    break
                if y in ctx.lt_in[x] and not less(w, u):
                    ok = False
                    break
            if ok:
                labels[x] = u
                extend(x + 1)
        labels[x] = None

    extend(0)
    return out


def process_forget(
    bag: tuple[int, ...], child_states: Iterable[State], forgotten: int, child_bag: tuple[int, ...], poset: UserPoset
) -> dict[State, State]:
    """Project child states up: steps on the forgotten user become its relation tuple."""
    pos = child_bag.index(forgotten)
    less = poset.less
    rel = tuple(LT if less(forgotten, u) else GT if less(u, forgotten) else INC for u in bag)
    out: dict[State, State] = {}
    for st in child_states:
        new = tuple(
            lab if lab is None or (type(lab) is int and lab != forgotten)
            else rel if type(lab) is int
            else lab[:pos] + lab[pos + 1:]
            for lab in st
        )
        if new not in out:
            out[new] = st
    return out


def _independent_subsets(cands: list[int], conflict: list[set[int]]) -> Iterator[tuple[int, ...]]:
    chosen: list[int] = []

    def walk(i: int):
        if i == len(cands):
            yield tuple(chosen)
            return
        yield from walk(i + 1)
        x = cands[i]
        if not any(y in conflict[x] for y in chosen):
            chosen.append(x)
            yield from walk(i + 1)
            chosen.pop()

    yield from walk(0)


def process_introduce(
    bag: tuple[int, ...], child_states: Iterable[State], introduced: int, ctx: Context
) -> dict[State, State]:
    """Extend child states by the introduced user.

    The new tuple coordinate of a forgotten-user step is forced: the bag
    separates forgotten users from the introduced one, so the step sits below
    it iff some bag user below it is above the step (and dually). Any subset
    of unplaced steps may then move onto the introduced user, provided it is
    authorized, conflict-free, and every arc to or from the subset is
    justified by the labels.
    """
    up = introduced
    pos = bag.index(up)
    child_bag = bag[:pos] + bag[pos + 1:]
    less = ctx.less
    below = [less(u, up) for u in child_bag]  # bag user u < introduced
    above = [less(up, u) for u in child_bag]
    idx = range(len(child_bag))
    k = ctx.k
    out: dict[State, State] = {}
    for st in child_states:
        new = list(st)
        consistent = True
        for x, lab in enumerate(st):
            if type(lab) is tuple:
                lo = any(lab[i] == LT and below[i] for i in idx)
                hi = any(lab[i] == GT and above[i] for i in idx)
                if lo and hi:
                    consistent = False
                    break
                c = LT if lo else GT if hi else INC
                new[x] = lab[:pos] + (c,) + lab[pos:]
        if not consistent:
            continue
        cands = []
        for x in range(k):
            if st[x] is not None or not ctx.auth[x][up]:
                continue
            ok = True
            for y in ctx.lt_in[x]:  # arc y -> x: y must end up below the introduced user
                lab = new[y]
                if lab is None:
                    continue
                if type(lab) is int:
                    if not less(lab, up):
                        ok = False
                        break
                elif lab[pos] != LT:
                    ok = False
                    break
            if ok:
                for y in ctx.lt_out[x]:
                    lab = new[y]
                    if lab is None:
                        continue
                    if type(lab) is int:
                        if not less(up, lab):
                            ok = False
                            break
                    elif lab[pos] != GT:
                        ok = False
                        break
            if ok:
                cands.append(x)
        base = tuple(new)
        for subset in _independent_subsets(cands, ctx.conflict):
            if subset:
                lst = list(base)
                for x in subset:
                    lst[x] = up
                state = tuple(lst)
            else:
                state = base
            if state not in out:
                out[state] = st
    return out


def process_join(
    left_states: Iterable[State], right_states: Iterable[State], ctx: Context
) -> dict[State, tuple[State, State]]:
    """Merge child states that agree on bag users and split the rest disjointly.

    An arc between a step resolved on the left and one resolved on the right
    needs a bag user strictly between them: source coordinate below it,
    target coordinate above it.
    """
    arcs = [(a, b) for a in range(ctx.k) for b in ctx.lt_out[a]]

    def key(st):
        mask = 0
        users = []
        for x, lab in enumerate(st):
            if type(lab) is tuple:
                mask |= 1 << x
                users.append(None)
            else:
                users.append(lab)
        return tuple(users), mask

    right: dict[tuple, dict[int, list[State]]] = {}
    for st in right_states:
        users, mask = key(st)
        right.setdefault(users, {}).setdefault(mask, []).append(st)
    out: dict[State, tuple[State, State]] = {}
    for lst in left_states:
        users, lmask = key(lst)
        groups = right.get(users)
        if not groups:
            continue
        for rmask, rstates in groups.items():
            if lmask & rmask:
                continue
            crossing = [
                (a, b)
                for a, b in arcs
                if ((lmask >> a) & 1 and (rmask >> b) & 1) or ((rmask >> a) & 1 and (lmask >> b) & 1)
            ]
            for rst in rstates:
                if crossing and not all(_witnessed(lst, rst, a, b) for a, b in crossing):
                    continue
                merged = tuple(l if l is not None else r for l, r in zip(lst, rst))
                if merged not in out:
                    out[merged] = (lst, rst)
    return out


def _witnessed(lst: State, rst: State, a: int, b: int) -> bool:
    ta = lst[a] if lst[a] is not None else rst[a]
    tb = lst[b] if lst[b] is not None else rst[b]
    return any(p == LT and q == GT for p, q in zip(ta, tb))


@dataclass
class SolveStats:
    nodes: int = 0
    leaf: int = 0
    introduce: int = 0
    forget: int = 0
    join: int = 0
    max_states: int = 0
    total_states: int = 0
    seconds: float = 0.0
    per_node: list[int] = field(default_factory=list, repr=False)

    def lines(self) -> list[str]:
        keys = ("nodes", "leaf", "introduce", "forget", "join", "max_states", "total_states")
        out = [f"{k}={getattr(self, k)}" for k in keys]
        out.append(f"seconds={self.seconds:.6f}")
        return out


@dataclass
class DPResult:
    sat: bool
    plan: dict[int, int] | None
    stats: SolveStats
    root_full_states: int = 0


def _check_universe(cg: ConstraintGraph, poset: UserPoset, ntd: NiceTreeDecomposition):
    if cg.n_users != poset.n:
        raise ValueError(f"constraint graph built for {cg.n_users} users, poset has {poset.n}")
    seen = set()
    for node in ntd.nodes:
        for u in node.bag:
            if not 0 <= u < poset.n:
                raise ValueError(f"decomposition mentions unknown user {u}")
            seen.add(u)
    if len(seen) != poset.n:
        raise ValueError("decomposition does not cover every user")


def run_tables(cg: ConstraintGraph, poset: UserPoset, ntd: NiceTreeDecomposition):
    """Compute the table of every node bottom-up; returns (tables, stats)."""
    _check_universe(cg, poset, ntd)
    ctx = Context.build(cg, poset)
    stats = SolveStats(nodes=len(ntd.nodes))
    started = time.perf_counter()
    tables: list[dict] = []
    for node in ntd.nodes:
        if node.kind == "leaf":
            table = process_leaf(node.bag, ctx)
        elif node.kind == "forget":
            child = ntd.nodes[node.children[0]]
            table = process_forget(node.bag, tables[node.children[0]], node.vertex, child.bag, poset)
        elif node.kind == "introduce":
            table = process_introduce(node.bag, tables[node.children[0]], node.vertex, ctx)
        else:
            table = process_join(tables[node.children[0]], tables[node.children[1]], ctx)
        tables.append(table)
        setattr(stats, node.kind, getattr(stats, node.kind) + 1)
        stats.per_node.append(len(table))
        stats.total_states += len(table)
        stats.max_states = max(stats.max_states, len(table))
    stats.seconds = time.perf_counter() - started
    return tables, stats


def full_root_states(ntd: NiceTreeDecomposition, tables) -> list[State]:
    return [st for st in tables[ntd.root] if all(lab is not None for lab in st)]


def extract_plan(ntd: NiceTreeDecomposition, tables, root_state: State) -> dict[int, int]:
    """Follow witnesses from the root down, binding steps as users are fixed."""
    plan: dict[int, int] = {}
    stack = [(ntd.root, root_state)]
    while stack:
        i, st = stack.pop()
        for x, lab in enumerate(st):
            if type(lab) is int:
                if plan.setdefault(x, lab) != lab:
                    raise SolverError(f"step {x} bound to two users during extraction")
        node = ntd.nodes[i]
        witness = tables[i][st]
        if node.kind in ("forget", "introduce"):
            stack.append((node.children[0], witness))
        elif node.kind == "join":
            stack.append((node.children[0], witness[0]))
            stack.append((node.children[1], witness[1]))
    return plan


def solve(cg: ConstraintGraph, poset: UserPoset, ntd: NiceTreeDecomposition) -> DPResult:
    """Decide the contracted instance; on success return a superstep plan."""
    tables, stats = run_tables(cg, poset, ntd)
    roots = full_root_states(ntd, tables)
    if not roots:
        return DPResult(False, None, stats, 0)
    plan = extract_plan(ntd, tables, roots[0])
    if len(plan) != cg.k:
        raise SolverError("extracted plan is not total over supersteps")
    return DPResult(True, plan, stats, len(roots))


def state_bound(width: int, k: int) -> int:
    """Number of possible labelings per node for bags of ``width + 1`` users."""
    r = width
    return (r + 2 + 3 ** (r + 1)) ** k


@dataclass
class Outcome:
    sat: bool
    plan: dict[int, int] | None
    reason: str = ""
    n: int = 0
    k: int = 0
    supersteps: int = 0
    width: int = -1
    stats: SolveStats | None = None
    timings: dict[str, float] = field(default_factory=dict)
    advisories: list[str] = field(default_factory=list)


def choose_strategy(n: int, strategy: str) -> str:
    if strategy == "auto":
        return "exact_small" if n <= EXACT_LIMIT else "min_fill"
    return strategy


def solve_instance(
    inst: WorkflowInstance, td: TreeDecomposition | None = None, strategy: str = "auto"
) -> Outcome:
    """Full pipeline: contract, decompose, nicify, run the DP, expand, recheck."""
    timings: dict[str, float] = {}
    t0 = time.perf_counter()
    diags = validate_instance(inst)
    out = Outcome(False, None, n=inst.n, k=inst.k)
    out.advisories = [str(d) for d in diags]
    cg = contract_equalities(inst)
    timings["preprocess"] = time.perf_counter() - t0
    if isinstance(cg, NoInstance):
        out.reason = cg.reason
        out.timings = timings
        return out
    out.supersteps = cg.k
    arcs = sorted(inst.users.cover_arcs)
    t1 = time.perf_counter()
    if td is None:
        td = decompose(inst.n, arcs, choose_strategy(inst.n, strategy))
    else:
        problems = validate_decomposition(inst.n, arcs, td)
        if problems:
            raise ValueError("supplied decomposition is invalid: " + "; ".join(problems))
    ntd = to_nice(td)
    timings["decompose"] = time.perf_counter() - t1
    out.width = ntd.width()
    t2 = time.perf_counter()
    res = solve(cg, inst.users, ntd)
    timings["dp"] = time.perf_counter() - t2
    out.stats = res.stats
    if res.sat:
        plan = expand_plan(cg, res.plan)
        problems = check_plan(inst, plan)
        if problems:
            raise SolverError("DP plan failed the recheck: " + "; ".join(problems))
        out.sat, out.plan = True, plan
    else:
        out.reason = "no root state places every step"
    timings["total"] = time.perf_counter() - t0
    out.timings = timings
    return out
