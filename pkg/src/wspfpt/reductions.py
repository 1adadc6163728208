"""Partitioned subgraph isomorphism -> SubTDAG embedding -> WSP instance chain.

Both reductions are constructive and small, which makes them a source of
structured hard instances with independently checkable answers.
"""
from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass

from .model import Constraint, Kind, ParseError, UserPoset, WorkflowInstance, NAME_RE
from .oracle import BudgetExceeded, default_budget
from .order import CycleError, degeneracy, is_transitive, transitive_closure


class ReductionError(ValueError):
    pass


def _pair(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class PsiInstance:
    """Pattern G, host H and a map from host vertices to pattern vertices (the classes)."""

    pattern_names: tuple[str, ...]
    pattern_edges: frozenset[tuple[int, int]]
    host_names: tuple[str, ...]
    host_edges: frozenset[tuple[int, int]]
    host_class: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "pattern_edges", frozenset(_pair(*e) for e in self.pattern_edges))
        object.__setattr__(self, "host_edges", frozenset(_pair(*e) for e in self.host_edges))
        if len(self.host_class) != len(self.host_names):
            raise ValueError("every host vertex needs a class")
        for a, b in itertools.chain(self.pattern_edges, self.host_edges):
            if a == b:
                raise ValueError("graphs must be loopless")

    @property
    def l(self) -> int:
        return len(self.pattern_names)

    def classes(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.l)]
        for x, i in enumerate(self.host_class):
            out[i].append(x)
        return out

    def isolated(self) -> list[int]:
        touched = {v for e in self.pattern_edges for v in e}
        return [g for g in range(self.l) if g not in touched]


@dataclass(frozen=True)
class SubTdagInstance:
    """Digraphs R (pattern) and D (host); ``targets`` pairs each w_i in W_R with W_{D,i}."""

    r_names: tuple[str, ...]
    r_arcs: frozenset[tuple[int, int]]
    d_names: tuple[str, ...]
    d_arcs: frozenset[tuple[int, int]]
    targets: tuple[tuple[int, frozenset[int]], ...]

    def problems(self) -> list[str]:
        out = []
        for label, n, arcs in (("R", len(self.r_names), self.r_arcs), ("D", len(self.d_names), self.d_arcs)):
            try:
                if not is_transitive(arcs):
                    out.append(f"{label} is not transitive")
                transitive_closure(arcs, range(n))
            except CycleError:
                out.append(f"{label} has a cycle")
        seen: set[int] = set()
        for w, ts in self.targets:
            if ts & seen:
                out.append(f"target set of {self.r_names[w]} overlaps another")
            seen |= ts
        if len({w for w, _ in self.targets}) != len(self.targets):
            out.append("a vertex of R is listed twice in W_R")
        return out


def _fresh(base: str, taken: set[str]) -> str:
    name = base
    while name in taken:
        name += "_"
    taken.add(name)
    return name


def _subdivide(names, edges) -> tuple[tuple[str, ...], frozenset[tuple[int, int]]]:
    """Subdivide every edge, orienting both halves towards the new middle vertex."""
    out = list(names)
    taken = set(out)
    arcs = set()
    for a, b in sorted(edges):
        mid = len(out)
        out.append(_fresh(f"{names[a]}_{names[b]}", taken))
        arcs.add((a, mid))
        arcs.add((b, mid))
    return tuple(out), frozenset(arcs)


def reduce_psi_to_subtdag(psi: PsiInstance) -> SubTdagInstance:
    lonely = psi.isolated()
    if lonely:
        raise ReductionError(
            "pattern has isolated vertices: " + ", ".join(psi.pattern_names[g] for g in lonely)
        )
    r_names, r_arcs = _subdivide(psi.pattern_names, psi.pattern_edges)
    d_names, d_arcs = _subdivide(psi.host_names, psi.host_edges)
    classes = psi.classes()
    targets = tuple((g, frozenset(classes[g])) for g in range(psi.l))
    return SubTdagInstance(r_names, r_arcs, d_names, d_arcs, targets)


def reduce_subtdag_to_wsp(st: SubTdagInstance) -> WorkflowInstance:
    """Users are D's vertices, steps are R's; arcs of R become seniority constraints."""
    problems = st.problems()
    if problems:
        raise ReductionError("; ".join(problems))
    users = UserPoset(st.d_names, st.d_arcs)
    if users.closure != st.d_arcs:
        raise ReductionError("order built from D differs from D itself")
    everyone = frozenset(range(len(st.d_names)))
    auth = [everyone] * len(st.r_names)
    for w, ts in st.targets:
        auth[w] = ts
    adjacent = {_pair(a, b) for a, b in st.r_arcs}
    constraints = [Constraint(Kind.LT, a, b) for a, b in sorted(st.r_arcs)]
    for a, b in itertools.combinations(range(len(st.r_names)), 2):
        if (a, b) not in adjacent:
            constraints.append(Constraint(Kind.NEQ, a, b))
    return WorkflowInstance(st.r_names, users, tuple(auth), tuple(constraints))


def structural_report(st: SubTdagInstance) -> dict[str, object]:
    """Transitivity and degeneracy of both digraphs of a SubTDAG instance."""
    return {
        "r_transitive": is_transitive(st.r_arcs),
        "d_transitive": is_transitive(st.d_arcs),
        "r_degeneracy": degeneracy(st.r_arcs, range(len(st.r_names))),
        "d_degeneracy": degeneracy(st.d_arcs, range(len(st.d_names))),
    }


# -- brute-force oracles ------------------------------------------------------

def _guard(space: int, budget: int | None):
    budget = default_budget() if budget is None else budget
    if space > budget:
        raise BudgetExceeded(f"search space {space} exceeds budget {budget}")


def brute_force_psi(psi: PsiInstance, budget: int | None = None) -> dict[int, int] | None:
    classes = psi.classes()
    _guard(math.prod(len(c) for c in classes), budget)
    host = psi.host_edges
    nbrs: list[list[int]] = [[] for _ in range(psi.l)]
    for a, b in psi.pattern_edges:
        nbrs[max(a, b)].append(min(a, b))
    phi: list[int] = []

    def search(g: int) -> bool:
        if g == psi.l:
            return True
        for x in classes[g]:
            if x in phi:
                continue
            if all(_pair(x, phi[h]) in host for h in nbrs[g]):
                phi.append(x)
                if search(g + 1):
                    return True
                phi.pop()
        return False

    return dict(enumerate(phi)) if search(0) else None


def brute_force_subtdag(st: SubTdagInstance, budget: int | None = None) -> dict[int, int] | None:
    nr, nd = len(st.r_names), len(st.d_names)
    cands: list[list[int]] = [list(range(nd)) for _ in range(nr)]
    for w, ts in st.targets:
        cands[w] = sorted(ts)
    _guard(math.prod(len(c) for c in cands), budget)
    # arcs of R checked once both ends are placed
    back: list[list[tuple[int, int]]] = [[] for _ in range(nr)]
    for a, b in st.r_arcs:
        back[max(a, b)].append((a, b))
    gamma: list[int] = []
    used: set[int] = set()

    def search(v: int) -> bool:
        if v == nr:
            return True
        for x in cands[v]:
            if x in used:
                continue
            gamma.append(x)
            if all((gamma[a], gamma[b]) in st.d_arcs for a, b in back[v]):
                used.add(x)
                if search(v + 1):
                    return True
                used.discard(x)
            gamma.pop()
        return False

    return dict(enumerate(gamma)) if search(0) else None


# -- generation ---------------------------------------------------------------

def gen_random_psi(
    seed: int, l: int, h: int, pattern_density: float = 0.5, host_density: float = 0.4, plant: bool | None = None
) -> PsiInstance:
    """Random PSI instance with no isolated pattern vertices and non-empty classes.

    With ``plant`` true a class-respecting copy of the pattern is forced into
    the host, so the answer is Yes; ``None`` lets the seed decide.
    """
    if l < 2 or h < l:
        raise ValueError("need at least two pattern vertices and one host vertex per class")
    rng = random.Random(seed)
    pairs = list(itertools.combinations(range(l), 2))
    edges = {p for p in pairs if rng.random() < pattern_density}
    for g in range(l):
        if not any(g in e for e in edges):
            edges.add(_pair(g, rng.choice([x for x in range(l) if x != g])))
    cls = list(range(l)) + [rng.randrange(l) for _ in range(h - l)]
    rng.shuffle(cls)
    host_edges = {
        (x, y) for x, y in itertools.combinations(range(h), 2)
        if cls[x] != cls[y] and rng.random() < host_density
    }
    if plant is None:
        plant = rng.random() < 0.5
    if plant:
        rep = [rng.choice([x for x in range(h) if cls[x] == g]) for g in range(l)]
        host_edges |= {_pair(rep[a], rep[b]) for a, b in edges}
    return PsiInstance(
        tuple(f"g{i}" for i in range(l)),
        frozenset(edges),
        tuple(f"x{i}" for i in range(h)),
        frozenset(host_edges),
        tuple(cls),
    )


# -- text formats -------------------------------------------------------------
#   p psi <pattern_vertices> <host_vertices>
#   g <name>                 pattern vertex
#   h <name> <pattern_name>  host vertex and the pattern vertex whose class it joins
#   eg <a> <b> / eh <a> <b>  pattern / host edge
#
#   p std <r_vertices> <d_vertices>
#   r <name> / d <name>      vertices of R and D
#   ar <a> <b> / ad <a> <b>  arcs of R and D
#   w <r_name> <d_name>...   a vertex of W_R and its target set

def _lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line.split()


def _name(tok: str, lineno: int) -> str:
    if not NAME_RE.match(tok):
        raise ParseError(f"bad name {tok!r}", lineno)
    return tok


def _header(tok, lineno, kind) -> tuple[int, int]:
    if len(tok) != 4 or tok[:2] != ["p", kind]:
        raise ParseError(f"expected 'p {kind} <count> <count>' first", lineno)
    try:
        return int(tok[2]), int(tok[3])
    except ValueError:
        raise ParseError("non-integer count in header", lineno) from None


def _lookup(table: dict[str, int], name: str, lineno: int) -> int:
    if name not in table:
        raise ParseError(f"unknown vertex {name!r}", lineno)
    return table[name]


def parse_psi(text: str) -> PsiInstance:
    header = None
    gs: dict[str, int] = {}
    hs: dict[str, int] = {}
    cls: list[str] = []
    eg, eh = [], []
    where: list[int] = []
    for lineno, tok in _lines(text):
        if header is None:
            header = _header(tok, lineno, "psi")
            continue
        tag = tok[0]
        if tag == "g" and len(tok) == 2:
            gs.setdefault(_name(tok[1], lineno), len(gs))
        elif tag == "h" and len(tok) == 3:
            hs.setdefault(_name(tok[1], lineno), len(hs))
            cls.append(tok[2])
            where.append(lineno)
        elif tag in ("eg", "eh") and len(tok) == 3:
            (eg if tag == "eg" else eh).append((lineno, tok[1], tok[2]))
        else:
            raise ParseError(f"unexpected line {' '.join(tok)!r}", lineno)
    if header is None:
        raise ParseError("missing 'p psi' header")
    if header != (len(gs), len(hs)) or len(cls) != len(hs):
        raise ParseError(f"header declares {header}, found ({len(gs)}, {len(cls)})")
    host_class = tuple(_lookup(gs, c, ln) for c, ln in zip(cls, where))
    return PsiInstance(
        tuple(gs),
        frozenset(_pair(_lookup(gs, a, ln), _lookup(gs, b, ln)) for ln, a, b in eg),
        tuple(hs),
        frozenset(_pair(_lookup(hs, a, ln), _lookup(hs, b, ln)) for ln, a, b in eh),
        host_class,
    )


def serialize_psi(psi: PsiInstance) -> str:
    out = [f"p psi {psi.l} {len(psi.host_names)}"]
    out += [f"g {g}" for g in psi.pattern_names]
    out += [f"h {x} {psi.pattern_names[c]}" for x, c in zip(psi.host_names, psi.host_class)]
    out += [f"eg {psi.pattern_names[a]} {psi.pattern_names[b]}" for a, b in sorted(psi.pattern_edges)]
    out += [f"eh {psi.host_names[a]} {psi.host_names[b]}" for a, b in sorted(psi.host_edges)]
    return "\n".join(out) + "\n"


def parse_std(text: str) -> SubTdagInstance:
    header = None
    rs: dict[str, int] = {}
    ds: dict[str, int] = {}
    ar, ad, ws = [], [], []
    for lineno, tok in _lines(text):
        if header is None:
            header = _header(tok, lineno, "std")
            continue
        tag = tok[0]
        if tag in ("r", "d") and len(tok) == 2:
            table = rs if tag == "r" else ds
            if tok[1] in table:
                raise ParseError(f"duplicate vertex {tok[1]!r}", lineno)
            table[_name(tok[1], lineno)] = len(table)
        elif tag in ("ar", "ad") and len(tok) == 3:
            (ar if tag == "ar" else ad).append((lineno, tok[1], tok[2]))
        elif tag == "w" and len(tok) >= 2:
            ws.append((lineno, tok[1], tok[2:]))
        else:
            raise ParseError(f"unexpected line {' '.join(tok)!r}", lineno)
    if header is None:
        raise ParseError("missing 'p std' header")
    if header != (len(rs), len(ds)):
        raise ParseError(f"header declares {header}, found ({len(rs)}, {len(ds)})")
    st = SubTdagInstance(
        tuple(rs),
        frozenset((_lookup(rs, a, ln), _lookup(rs, b, ln)) for ln, a, b in ar),
        tuple(ds),
        frozenset((_lookup(ds, a, ln), _lookup(ds, b, ln)) for ln, a, b in ad),
        tuple(
            (_lookup(rs, w, ln), frozenset(_lookup(ds, x, ln) for x in xs)) for ln, w, xs in ws
        ),
    )
    problems = st.problems()
    if problems:
        raise ParseError("; ".join(problems))
    return st


def serialize_std(st: SubTdagInstance) -> str:
    out = [f"p std {len(st.r_names)} {len(st.d_names)}"]
    out += [f"r {v}" for v in st.r_names]
    out += [f"d {v}" for v in st.d_names]
    out += [f"ar {st.r_names[a]} {st.r_names[b]}" for a, b in sorted(st.r_arcs)]
    out += [f"ad {st.d_names[a]} {st.d_names[b]}" for a, b in sorted(st.d_arcs)]
    for w, ts in st.targets:
        out.append(" ".join(["w", st.r_names[w], *(st.d_names[x] for x in sorted(ts))]))
    return "\n".join(out) + "\n"
