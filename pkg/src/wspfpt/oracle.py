"""Brute-force reference solver and seeded random instance generation."""
from __future__ import annotations

import math
import os
import random
from dataclasses import dataclass

from .model import Constraint, Kind, UserPoset, WorkflowInstance

DEFAULT_BUDGET = 10**8


class BudgetExceeded(RuntimeError):
    pass


def default_budget() -> int:
    return int(os.environ.get("WSP_BUDGET", DEFAULT_BUDGET))


def _reachability(n: int, cover_arcs) -> list[set[int]]:
    # plain DFS from every user; deliberately not shared with UserPoset
    succ: list[list[int]] = [[] for _ in range(n)]
    for a, b in cover_arcs:
        succ[a].append(b)
    reach = []
    for s in range(n):
        seen: set[int] = set()
        stack = list(succ[s])
        while stack:
            x = stack.pop()
            if x not in seen:
                seen.add(x)
                stack.extend(succ[x])
        reach.append(seen)
    return reach


def brute_force_solve(inst: WorkflowInstance, budget: int | None = None) -> dict[int, int] | None:
    """Lexicographically first valid plan (steps in id order, users ascending), or None."""
    budget = default_budget() if budget is None else budget
    lists = [sorted(a) for a in inst.auth]
    space = math.prod(len(a) for a in lists)
    if space > budget:
        raise BudgetExceeded(
            f"search space {space} exceeds budget {budget}; use the DP solver instead"
        )
    above = _reachability(inst.n, inst.users.cover_arcs)
    # constraints checked when their later step is assigned
    checks: list[list[Constraint]] = [[] for _ in range(inst.k)]
    for c in inst.constraints:
        checks[max(c.s1, c.s2)].append(c)
    plan: list[int] = [0] * inst.k

    def holds(c: Constraint) -> bool:
        a, b = plan[c.s1], plan[c.s2]
        if c.kind is Kind.EQ:
            return a == b
        if c.kind is Kind.NEQ:
            return a != b
        return b in above[a]

    def search(s: int) -> bool:
        if s == inst.k:
            return True
        for u in lists[s]:
            plan[s] = u
            if all(holds(c) for c in checks[s]) and search(s + 1):
                return True
        return False

    if search(0):
        return dict(enumerate(plan))
    return None


@dataclass(frozen=True)
class GenParams:
    n: int
    k: int
    arc_density: float = 0.3
    auth_density: float = 0.6
    eq: int = 0
    neq: int = 0
    lt: int = 0


def random_dag_arcs(rng: random.Random, n: int, density: float) -> list[tuple[int, int]]:
    """Forward coin flips along a random topological order of the users."""
    perm = list(range(n))
    rng.shuffle(perm)
    return [(perm[i], perm[j]) for i in range(n) for j in range(i + 1, n) if rng.random() < density]


def gen_random_instance(params: GenParams, seed: int) -> WorkflowInstance:
    """Random instance; identical (params, seed) always give the identical instance.

    Each constraint kind draws its step pairs without replacement from the
    unordered pairs of distinct steps; seniority pairs get a random direction.
    """
    p = params
    if not (0.0 <= p.arc_density <= 1.0 and 0.0 <= p.auth_density <= 1.0):
        raise ValueError("densities must lie in [0, 1]")
    pairs = [(a, b) for a in range(p.k) for b in range(a + 1, p.k)]
    for kind, count in (("eq", p.eq), ("neq", p.neq), ("lt", p.lt)):
        if count < 0 or count > len(pairs):
            raise ValueError(f"{count} {kind} constraints requested, only {len(pairs)} step pairs")
    rng = random.Random(seed)
    arcs = random_dag_arcs(rng, p.n, p.arc_density)
    users = UserPoset([f"u{i}" for i in range(p.n)], arcs)
    auth = [frozenset(u for u in range(p.n) if rng.random() < p.auth_density) for _ in range(p.k)]
    constraints = []
    for kind, count in ((Kind.EQ, p.eq), (Kind.NEQ, p.neq), (Kind.LT, p.lt)):
        for a, b in rng.sample(pairs, count):
            if kind is Kind.LT and rng.random() < 0.5:
                a, b = b, a
            constraints.append(Constraint(kind, a, b))
    return WorkflowInstance(tuple(f"s{i}" for i in range(p.k)), users, tuple(auth), tuple(constraints))


def random_partial_ktree_arcs(rng: random.Random, n: int, width: int) -> list[tuple[int, int]]:
    """Arcs of a random partial k-tree; every arc points from a newer to an older user.

    New users attach to a random existing clique, keeping a random non-empty
    subset of the attachment edges, so treewidth stays at most ``width``.
    """
    arcs = []
    cliques: list[tuple[int, ...]] = []
    for v in range(n):
        if v == 0:
            cliques.append((0,))
            continue
        base = rng.choice(cliques)
        if len(base) > width:
            base = tuple(rng.sample(base, width))
        keep = [u for u in base if rng.random() < 0.7] or [rng.choice(base)]
        arcs += [(v, u) for u in keep]
        cliques.append(tuple(sorted(base + (v,))))
    return arcs
