"""Superstep contraction of equality constraints and the mixed constraint graph."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .model import Kind, WorkflowInstance


@dataclass(frozen=True)
class NoInstance:
    reason: str


@dataclass(frozen=True)
class ConstraintGraph:
    """Supersteps ``0..k'-1`` with != edges and < arcs between them."""

    members: tuple[tuple[int, ...], ...]
    auth: tuple[frozenset[int], ...]
    neq_edges: frozenset[tuple[int, int]]
    lt_arcs: frozenset[tuple[int, int]]
    n_users: int

    @property
    def k(self) -> int:
        return len(self.members)

    def step_to_super(self) -> dict[int, int]:
        return {s: q for q, group in enumerate(self.members) for s in group}

    def to_dot(self, step_names=None) -> str:
        def label(q):
            names = [step_names[s] if step_names else str(s) for s in self.members[q]]
            return "_".join(names)

        lines = ["graph constraints {"]
        for q in range(self.k):
            lines.append(f'  "{label(q)}";')
        for a, b in sorted(self.lt_arcs):
            lines.append(f'  "{label(a)}" -> "{label(b)}" [label="<"];')
        for a, b in sorted(self.neq_edges):
            lines.append(f'  "{label(a)}" -- "{label(b)}" [label="!="];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def _find(parent: list[int], x: int) -> int:
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


def contract_equalities(inst: WorkflowInstance) -> ConstraintGraph | NoInstance:
    parent = list(range(inst.k))
    for c in inst.constraints:
        if c.kind is Kind.EQ:
            a, b = _find(parent, c.s1), _find(parent, c.s2)
            if a != b:
                parent[max(a, b)] = min(a, b)
    groups: dict[int, list[int]] = {}
    for s in range(inst.k):
        groups.setdefault(_find(parent, s), []).append(s)
    # roots are smallest members, so sorting roots orders supersteps by min member
    members = tuple(tuple(groups[r]) for r in sorted(groups))
    where = {s: q for q, group in enumerate(members) for s in group}

    neq, lt = set(), set()
    for c in inst.constraints:
        if c.kind is Kind.EQ:
            continue
        a, b = where[c.s1], where[c.s2]
        if a == b:
            return NoInstance(
                f"{c.kind.value} constraint between {inst.step_names[c.s1]} and "
                f"{inst.step_names[c.s2]}, which must share a user"
            )
        if c.kind is Kind.NEQ:
            neq.add((min(a, b), max(a, b)))
        else:
            lt.add((a, b))

    auth = []
    for group in members:
        allowed = set(inst.auth[group[0]])
        for s in group[1:]:
            allowed &= inst.auth[s]
        auth.append(frozenset(allowed))
    return ConstraintGraph(members, tuple(auth), frozenset(neq), frozenset(lt), inst.n)


def expand_plan(graph: ConstraintGraph, superplan: Mapping[int, int]) -> dict[int, int]:
    return {s: superplan[q] for q, group in enumerate(graph.members) for s in group}
