"""Instance data model for WSP(=, !=, <): users, steps, authorizations, constraints."""
from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, NamedTuple, Sequence

from .order import CycleError, reach_bitsets, iter_bits, succ_lists

NAME_RE = re.compile(r"[A-Za-z0-9_]+\Z")

# Above this many users the closure is held as per-user sets instead of a
# dense byte matrix.
DENSE_LIMIT = 4096


class ParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class Kind(str, Enum):
    EQ = "eq"
    NEQ = "neq"
    LT = "lt"


@dataclass(frozen=True, order=True)
class Constraint:
    kind: Kind
    s1: int
    s2: int

    def normalized(self) -> Constraint:
        if self.kind is not Kind.LT and self.s1 > self.s2:
            return Constraint(self.kind, self.s2, self.s1)
        return self


class UserPoset:
    """A strict partial order on users ``0..n-1``.

    Holds both the Hasse diagram (``cover_arcs``) and the full order
    (``closure``); whichever arcs are supplied, both are derived.
    """

    def __init__(self, names: Sequence[str], arcs: Iterable[tuple[int, int]] = ()):
        self.names = tuple(names)
        n = self.n = len(self.names)
        arcs = list(arcs)
        for x, y in arcs:
            if not (0 <= x < n and 0 <= y < n):
                raise ValueError(f"order arc ({x}, {y}) out of range for {n} users")
        succ = succ_lists(n, arcs)
        reach = reach_bitsets(n, succ)  # raises CycleError
        covers = set()
        for x in range(n):
            implied = 0
            for z in succ[x]:
                implied |= reach[z]
            for y in succ[x]:
                if not (implied >> y) & 1:
                    covers.add((x, y))
        self.cover_arcs = frozenset(covers)
        self.closure = frozenset((x, y) for x in range(n) for y in iter_bits(reach[x]))
        self._up: list[list[int]] = [[] for _ in range(n)]
        self._down: list[list[int]] = [[] for _ in range(n)]
        for x, y in sorted(covers):
            self._up[x].append(y)
            self._down[y].append(x)
        if n <= DENSE_LIMIT:
            rows = []
            for x in range(n):
                row = bytearray(n)
                for y in iter_bits(reach[x]):
                    row[y] = 1
                rows.append(row)
            self._less = rows
        else:
            self._less = [set(iter_bits(reach[x])) for x in range(n)]
        if len(set(self.names)) != n:
            raise ValueError("user names must be distinct")

    def less(self, u: int, v: int) -> bool:
        """True iff ``u < v`` (u is strictly junior to v)."""
        row = self._less[u]
        return bool(row[v]) if isinstance(row, bytearray) else v in row

    def covers_above(self, u: int) -> list[int]:
        return self._up[u]

    def covers_below(self, u: int) -> list[int]:
        return self._down[u]

    def index(self, name: str) -> int:
        return self.names.index(name)

    def __eq__(self, other):
        if not isinstance(other, UserPoset):
            return NotImplemented
        return self.names == other.names and self.cover_arcs == other.cover_arcs

    def __hash__(self):
        return hash((self.names, self.cover_arcs))

    def __repr__(self):
        return f"UserPoset(n={self.n}, covers={len(self.cover_arcs)})"


@dataclass(frozen=True)
class WorkflowInstance:
    step_names: tuple[str, ...]
    users: UserPoset
    auth: tuple[frozenset[int], ...]
    constraints: tuple[Constraint, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "step_names", tuple(self.step_names))
        object.__setattr__(self, "auth", tuple(frozenset(a) for a in self.auth))
        seen: dict[Constraint, None] = {}
        for c in self.constraints:
            seen.setdefault(c.normalized(), None)
        object.__setattr__(self, "constraints", tuple(seen))

    @property
    def k(self) -> int:
        return len(self.step_names)

    @property
    def n(self) -> int:
        return self.users.n

    def auth_matrix(self) -> list[bytearray]:
        rows = []
        for s in range(self.k):
            row = bytearray(self.n)
            for u in self.auth[s]:
                row[u] = 1
            rows.append(row)
        return rows

    def describe_plan(self, plan: Mapping[int, int]) -> dict[str, str]:
        return {self.step_names[s]: self.users.names[u] for s, u in sorted(plan.items())}


class Diagnostic(NamedTuple):
    severity: str  # "error" or "advisory"
    message: str

    def __str__(self):
        return f"{self.severity}: {self.message}"


def check_plan(inst: WorkflowInstance, plan: Mapping[int, int]) -> list[str]:
    """Every way ``plan`` fails to be a valid plan of ``inst``; empty iff valid."""
    problems = []
    for s in range(inst.k):
        if s not in plan:
            problems.append(f"step {inst.step_names[s]} unassigned")
        elif plan[s] not in inst.auth[s]:
            problems.append(f"step {inst.step_names[s]}: user {plan[s]} not authorized")
    for c in inst.constraints:
        if c.s1 not in plan or c.s2 not in plan:
            continue
        a, b = plan[c.s1], plan[c.s2]
        ok = {
            Kind.EQ: a == b,
            Kind.NEQ: a != b,
            Kind.LT: a != b and (a, b) in inst.users.closure,
        }[c.kind]
        if not ok:
            problems.append(
                f"constraint {c.kind.value} {inst.step_names[c.s1]} {inst.step_names[c.s2]} violated"
            )
    return problems


def validate_instance(inst: WorkflowInstance) -> list[Diagnostic]:
    diags: list[Diagnostic] = []
    n, k = inst.n, inst.k
    if len(inst.auth) != k:
        diags.append(Diagnostic("error", f"{len(inst.auth)} authorization lists for {k} steps"))
    for s, users in enumerate(inst.auth):
        bad = sorted(u for u in users if not 0 <= u < n)
        if bad:
            diags.append(Diagnostic("error", f"step {s} authorizes unknown users {bad}"))
        if not users:
            name = inst.step_names[s] if s < k else str(s)
            diags.append(Diagnostic("advisory", f"no authorized user for step {name} (trivially unsatisfiable)"))
    if len(set(inst.step_names)) != k:
        diags.append(Diagnostic("error", "step names are not distinct"))
    for c in inst.constraints:
        if not (0 <= c.s1 < k and 0 <= c.s2 < k):
            diags.append(Diagnostic("error", f"constraint {c} references an unknown step"))
            continue
        if c.s1 == c.s2 and c.kind is not Kind.EQ:
            what = "reflexive disequality" if c.kind is Kind.NEQ else "reflexive seniority"
            diags.append(Diagnostic("error", f"{what} on step {inst.step_names[c.s1]} (unsatisfiable)"))
    closure = inst.users.closure
    if any(x == y for x, y in closure):
        diags.append(Diagnostic("error", "order closure is reflexive"))
    return diags


# -- text format --------------------------------------------------------------

def _check_name(token: str, lineno: int) -> str:
    if not NAME_RE.match(token):
        raise ParseError(f"bad name {token!r}", lineno)
    return token


def parse_instance(text: str) -> WorkflowInstance:
    header = None
    users: list[str] = []
    steps: list[str] = []
    auth_lines: list[tuple[int, str, list[str]]] = []
    order_lines: list[tuple[int, str, str]] = []
    cons_lines: list[tuple[int, str, str, str]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        tag = tok[0]
        if header is None:
            if tag != "p":
                raise ParseError("the 'p wsp' line must come first", lineno)
            if len(tok) != 4 or tok[1] != "wsp":
                raise ParseError("expected 'p wsp <n_users> <k_steps>'", lineno)
            try:
                header = (int(tok[2]), int(tok[3]))
            except ValueError:
                raise ParseError("non-integer count in header", lineno) from None
            if min(header) < 0:
                raise ParseError("negative count in header", lineno)
            continue
        if tag == "p":
            raise ParseError("duplicate 'p' line", lineno)
        elif tag == "u":
            if len(tok) != 2:
                raise ParseError("expected 'u <name>'", lineno)
            users.append(_check_name(tok[1], lineno))
        elif tag == "s":
            if len(tok) != 2:
                raise ParseError("expected 's <name>'", lineno)
            steps.append(_check_name(tok[1], lineno))
        elif tag == "a":
            if len(tok) < 2:
                raise ParseError("expected 'a <step> <user>...'", lineno)
            auth_lines.append((lineno, tok[1], tok[2:]))
        elif tag == "o":
            if len(tok) != 3:
                raise ParseError("expected 'o <user_lo> <user_hi>'", lineno)
            order_lines.append((lineno, tok[1], tok[2]))
        elif tag == "c":
            if len(tok) != 4 or tok[1] not in ("eq", "neq", "lt"):
                raise ParseError("expected 'c eq|neq|lt <step1> <step2>'", lineno)
            cons_lines.append((lineno, tok[1], tok[2], tok[3]))
        else:
            raise ParseError(f"unknown line tag {tag!r}", lineno)
    if header is None:
        raise ParseError("missing 'p wsp' header")
    if len(users) != header[0]:
        raise ParseError(f"header declares {header[0]} users, found {len(users)}")
    if len(steps) != header[1]:
        raise ParseError(f"header declares {header[1]} steps, found {len(steps)}")
    uid = {}
    for name in users:
        if name in uid:
            raise ParseError(f"duplicate user name {name!r}")
        uid[name] = len(uid)
    sid = {}
    for name in steps:
        if name in sid:
            raise ParseError(f"duplicate step name {name!r}")
        sid[name] = len(sid)

    def lookup(table, name, what, lineno):
        _check_name(name, lineno)
        if name not in table:
            raise ParseError(f"unknown {what} {name!r}", lineno)
        return table[name]

    auth: list[set[int]] = [set() for _ in steps]
    for lineno, s, names in auth_lines:
        s = lookup(sid, s, "step", lineno)
        auth[s].update(lookup(uid, u, "user", lineno) for u in names)
    arcs = []
    for lineno, lo, hi in order_lines:
        arcs.append((lookup(uid, lo, "user", lineno), lookup(uid, hi, "user", lineno)))
    try:
        poset = UserPoset(users, arcs)
    except CycleError as exc:
        raise ParseError(f"cyclic order declaration: {exc}") from None
    constraints = []
    for lineno, kind, a, b in cons_lines:
        constraints.append(
            Constraint(Kind(kind), lookup(sid, a, "step", lineno), lookup(sid, b, "step", lineno))
        )
    return WorkflowInstance(tuple(steps), poset, tuple(auth), tuple(constraints))


def serialize_instance(inst: WorkflowInstance) -> str:
    names = inst.users.names
    out = [f"p wsp {inst.n} {inst.k}"]
    out += [f"u {u}" for u in names]
    out += [f"s {s}" for s in inst.step_names]
    for s, users in enumerate(inst.auth):
        if users:
            out.append(f"a {inst.step_names[s]} " + " ".join(names[u] for u in sorted(users)))
    out += [f"o {names[x]} {names[y]}" for x, y in sorted(inst.users.cover_arcs)]
    out += [
        f"c {c.kind.value} {inst.step_names[c.s1]} {inst.step_names[c.s2]}" for c in inst.constraints
    ]
    return "\n".join(out) + "\n"


def load_instance(path) -> WorkflowInstance:
    with open(path, encoding="utf-8") as fh:
        return parse_instance(fh.read())
