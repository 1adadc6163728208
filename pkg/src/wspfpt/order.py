"""Algorithms on strict partial orders given as DAG arc sets.

Vertices may be any hashable labels. Reachability is computed with integer
bitsets over a topological numbering, which keeps closure and reduction
cheap for the few-thousand-user hierarchies this package targets.
"""
from __future__ import annotations

from collections import deque
from enum import IntEnum
from typing import TYPE_CHECKING, Hashable, Iterable, Mapping, Sequence

if TYPE_CHECKING:
    from .model import UserPoset

Arc = tuple[Hashable, Hashable]


class CycleError(ValueError):
    """Raised when an arc set that should be acyclic contains a cycle."""


class Rel(IntEnum):
    """Relation of one user to another: ``LT`` means "is junior to"."""

    LT = 0
    GT = 1
    INC = 2

    def __str__(self) -> str:
        return ("[<]", "[>]", "[~]")[self]


def _index(arcs: Iterable[Arc], vertices: Iterable[Hashable] | None):
    labels: dict[Hashable, int] = {}
    if vertices is not None:
        for v in vertices:
            labels.setdefault(v, len(labels))
    pairs = []
    for x, y in arcs:
        i = labels.setdefault(x, len(labels))
        j = labels.setdefault(y, len(labels))
        pairs.append((i, j))
    return labels, pairs


def topological_order(n: int, succ: Sequence[Iterable[int]]) -> list[int]:
    """Kahn's algorithm over ``0..n-1``; raises CycleError on a cycle."""
    indeg = [0] * n
    for x in range(n):
        for y in succ[x]:
            indeg[y] += 1
    queue = deque(v for v in range(n) if indeg[v] == 0)
    order = []
    while queue:
        x = queue.popleft()
        order.append(x)
        for y in succ[x]:
            indeg[y] -= 1
            if indeg[y] == 0:
                queue.append(y)
    if len(order) != n:
        stuck = sorted(v for v in range(n) if indeg[v] > 0)
        raise CycleError(f"order relation contains a cycle through vertex {stuck[0]}")
    return order


def reach_bitsets(n: int, succ: Sequence[Iterable[int]]) -> list[int]:
    """For each vertex, the bitset of vertices reachable by a non-empty path."""
    order = topological_order(n, succ)
    reach = [0] * n
    for x in reversed(order):
        acc = 0
        for y in succ[x]:
            acc |= reach[y] | (1 << y)
        reach[x] = acc
    return reach


def iter_bits(mask: int):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def succ_lists(n: int, pairs: Iterable[tuple[int, int]]) -> list[list[int]]:
    succ: list[list[int]] = [[] for _ in range(n)]
    seen = set()
    for i, j in pairs:
        if i == j:
            raise CycleError(f"self-loop at vertex {i}")
        if (i, j) not in seen:
            seen.add((i, j))
            succ[i].append(j)
    return succ


def transitive_closure(arcs: Iterable[Arc], vertices: Iterable[Hashable] | None = None) -> set[Arc]:
    """All pairs ``(x, y)`` joined by a directed path in the acyclic arc set."""
    labels, pairs = _index(arcs, vertices)
    back = list(labels)
    succ = succ_lists(len(back), pairs)
    reach = reach_bitsets(len(back), succ)
    return {(back[i], back[j]) for i in range(len(back)) for j in iter_bits(reach[i])}


def transitive_reduction(arcs: Iterable[Arc], vertices: Iterable[Hashable] | None = None) -> set[Arc]:
    """The unique minimal arc set with the same transitive closure.

    An arc ``x -> y`` survives iff ``y`` is not reachable from any other
    successor of ``x``.
    """
    labels, pairs = _index(arcs, vertices)
    back = list(labels)
    succ = succ_lists(len(back), pairs)
    reach = reach_bitsets(len(back), succ)
    out = set()
    for x in range(len(back)):
        implied = 0
        for z in succ[x]:
            implied |= reach[z]
        for y in succ[x]:
            if not (implied >> y) & 1:
                out.add((back[x], back[y]))
    return out


def is_transitive(arcs: Iterable[Arc]) -> bool:
    arcs = set(arcs)
    return transitive_closure(arcs) == arcs


def compare(poset: UserPoset, u: int, v: int) -> Rel:
    """Relation of ``u`` to ``v`` in the poset's full order."""
    if u == v:
        raise ValueError(f"reflexive comparison of user {u}")
    if poset.less(u, v):
        return Rel.LT
    if poset.less(v, u):
        return Rel.GT
    return Rel.INC


def relation_tuple(poset: UserPoset, v: int, bag: Sequence[int]) -> tuple[Rel, ...]:
    """Coordinatewise relation of user ``v`` to each user of ``bag``."""
    if v in bag:
        raise ValueError(f"user {v} belongs to the bag {tuple(bag)}")
    less = poset.less
    return tuple(Rel.LT if less(v, u) else Rel.GT if less(u, v) else Rel.INC for u in bag)


def separates(poset: UserPoset, barrier: Iterable[int], y: int, z: int) -> bool:
    """True iff removing ``barrier`` from the Hasse diagram leaves no path y -> z.

    One direction only; call twice for symmetric separation.
    """
    barrier = set(barrier)
    if y == z:
        raise ValueError("separation needs two distinct users")
    if y in barrier or z in barrier:
        raise ValueError("endpoints must lie outside the barrier")
    seen = {y}
    stack = [y]
    while stack:
        x = stack.pop()
        for w in poset.covers_above(x):
            if w == z:
                return False
            if w not in seen and w not in barrier:
                seen.add(w)
                stack.append(w)
    return True


def degeneracy(edges: Iterable[tuple[Hashable, Hashable]], vertices: Iterable[Hashable] = ()) -> int:
    """Degeneracy of the underlying undirected graph, by min-degree peeling."""
    adj: dict[Hashable, set] = {v: set() for v in vertices}
    for a, b in edges:
        adj.setdefault(a, set())
        adj.setdefault(b, set())
        if a != b:
            adj[a].add(b)
            adj[b].add(a)
    return peel_degeneracy(adj)


def peel_degeneracy(adj: Mapping[Hashable, set]) -> int:
    adj = {v: set(ns) for v, ns in adj.items()}
    buckets: dict[int, set] = {}
    for v, ns in adj.items():
        buckets.setdefault(len(ns), set()).add(v)
    best = 0
    remaining = len(adj)
    while remaining:
        d = min(k for k, b in buckets.items() if b)
        v = buckets[d].pop()
        best = max(best, d)
        remaining -= 1
        for w in adj[v]:
            dw = len(adj[w])
            buckets[dw].discard(w)
            adj[w].discard(v)
            buckets.setdefault(dw - 1, set()).add(w)
        adj[v] = set()
    return best
