"""Tree decompositions of the user Hasse diagram: build, check, load, nicify.

Graphs are given as ``(n, arcs)`` over vertices ``0..n-1``; orientation is
ignored everywhere in this module.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Iterable, Sequence

from .order import iter_bits, peel_degeneracy

EXACT_LIMIT = 20
STRATEGIES = ("min_degree", "min_fill", "exact_small")


class DecompositionError(ValueError):
    pass


@dataclass(frozen=True)
class TreeDecomposition:
    bags: tuple[tuple[int, ...], ...]
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        object.__setattr__(self, "bags", tuple(tuple(sorted(set(b))) for b in self.bags))
        object.__setattr__(
            self, "edges", tuple(sorted((min(a, b), max(a, b)) for a, b in self.edges))
        )

    def width(self) -> int:
        if not self.bags:
            raise DecompositionError("empty decomposition has no width")
        return max(len(b) for b in self.bags) - 1

    def adjacency(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in self.bags]
        for a, b in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        return adj


@dataclass(frozen=True)
class NiceNode:
    kind: str  # "leaf", "introduce", "forget" or "join"
    bag: tuple[int, ...]
    children: tuple[int, ...] = ()
    vertex: int | None = None  # introduced or forgotten user


@dataclass(frozen=True)
class NiceTreeDecomposition:
    """Nodes listed in post-order: children precede parents, root is last."""

    nodes: tuple[NiceNode, ...]

    @property
    def root(self) -> int:
        return len(self.nodes) - 1

    def width(self) -> int:
        return max(len(node.bag) for node in self.nodes) - 1

    def counts(self) -> dict[str, int]:
        out = {"leaf": 0, "introduce": 0, "forget": 0, "join": 0}
        for node in self.nodes:
            out[node.kind] += 1
        return out

    def as_tree_decomposition(self) -> TreeDecomposition:
        edges = [(i, c) for i, node in enumerate(self.nodes) for c in node.children]
        return TreeDecomposition(tuple(node.bag for node in self.nodes), tuple(edges))


def _undirected(n: int, arcs: Iterable[tuple[int, int]]) -> list[set[int]]:
    adj = [set() for _ in range(n)]
    for a, b in arcs:
        if a != b:
            adj[a].add(b)
            adj[b].add(a)
    return adj


def _tree_shape_problems(td: TreeDecomposition) -> list[str]:
    m = len(td.bags)
    problems = []
    if m == 0:
        return ["decomposition has no bags"]
    for a, b in td.edges:
        if not (0 <= a < m and 0 <= b < m) or a == b:
            problems.append(f"tree edge ({a}, {b}) is not between two distinct bags")
    if problems:
        return problems
    if len(set(td.edges)) != len(td.edges):
        problems.append("duplicate tree edge")
    if len(td.edges) != m - 1:
        problems.append(f"{len(td.edges)} tree edges for {m} bags: not a tree")
    adj = td.adjacency()
    seen = {0}
    stack = [0]
    while stack:
        x = stack.pop()
        for y in adj[x]:
            if y not in seen:
                seen.add(y)
                stack.append(y)
    if len(seen) != m:
        problems.append("tree edges do not connect all bags")
    return problems


def _occurrence_problems(td: TreeDecomposition) -> list[str]:
    adj = td.adjacency()
    where: dict[int, list[int]] = {}
    for i, bag in enumerate(td.bags):
        for v in bag:
            where.setdefault(v, []).append(i)
    problems = []
    for v, nodes in sorted(where.items()):
        inside = set(nodes)
        seen = {nodes[0]}
        stack = [nodes[0]]
        while stack:
            x = stack.pop()
            for y in adj[x]:
                if y in inside and y not in seen:
                    seen.add(y)
                    stack.append(y)
        if seen != inside:
            problems.append(f"condition 3: bags containing vertex {v} are not connected")
    return problems


def validate_decomposition(n: int, arcs: Iterable[tuple[int, int]], td: TreeDecomposition) -> list[str]:
    """Diagnostics for the three covering/connectivity conditions and tree shape."""
    problems = _tree_shape_problems(td)
    if problems:
        return problems
    covered = set()
    for i, bag in enumerate(td.bags):
        for v in bag:
            if not 0 <= v < n:
                problems.append(f"bag {i} holds unknown vertex {v}")
        covered.update(bag)
    for v in range(n):
        if v not in covered:
            problems.append(f"condition 1: vertex {v} is in no bag")
    bag_sets = [set(b) for b in td.bags]
    for a, b in sorted(set(arcs)):
        if not any(a in bs and b in bs for bs in bag_sets):
            problems.append(f"condition 2: arc ({a}, {b}) is in no bag")
    problems += _occurrence_problems(td)
    return problems


def validate_nice(ntd: NiceTreeDecomposition) -> list[str]:
    problems = []
    nodes = ntd.nodes
    if not nodes:
        return ["nice decomposition has no nodes"]
    parents = [0] * len(nodes)
    for i, node in enumerate(nodes):
        for c in node.children:
            if not 0 <= c < i:
                problems.append(f"node {i}: child {c} is not listed before its parent")
                continue
            parents[c] += 1
        kids = [nodes[c].bag for c in node.children if 0 <= c < i]
        if node.kind == "leaf":
            ok = not node.children
        elif node.kind == "join":
            ok = len(kids) == 2 and kids[0] == node.bag == kids[1]
        elif node.kind == "forget":
            ok = (
                len(kids) == 1
                and node.vertex in kids[0]
                and tuple(sorted(node.bag + (node.vertex,))) == kids[0]
            )
        elif node.kind == "introduce":
            ok = (
                len(kids) == 1
                and node.vertex in node.bag
                and tuple(v for v in node.bag if v != node.vertex) == kids[0]
            )
        else:
            ok = False
        if not ok:
            problems.append(f"node {i}: malformed {node.kind} node")
    for i, count in enumerate(parents):
        expected = 0 if i == ntd.root else 1
        if count != expected:
            problems.append(f"node {i} has {count} parents")
    return problems


# -- elimination orderings ----------------------------------------------------

def _fill_in(adj: list[set[int]], v: int) -> int:
    ns = sorted(adj[v])
    missing = 0
    for i, a in enumerate(ns):
        row = adj[a]
        for b in ns[i + 1:]:
            if b not in row:
                missing += 1
    return missing


def _eliminate(adj: list[set[int]], v: int) -> list[int]:
    ns = sorted(adj[v])
    for a in ns:
        adj[a].discard(v)
        adj[a].update(b for b in ns if b != a)
    adj[v] = set()
    return ns


def elimination_order(n: int, arcs: Iterable[tuple[int, int]], strategy: str) -> list[int]:
    """Greedy ordering by minimum degree or minimum fill-in.

    Min-fill breaks ties by degree, then both break ties by lowest id.
    """
    adj = _undirected(n, arcs)
    if strategy == "min_fill":
        score = lambda g, v: (_fill_in(g, v), len(g[v]))  # noqa: E731
    else:
        score = lambda g, v: len(g[v])  # noqa: E731
    cur = {v: score(adj, v) for v in range(n)}
    heap = [(s, v) for v, s in cur.items()]
    heapq.heapify(heap)
    alive = [True] * n
    order = []
    while heap:
        s, v = heapq.heappop(heap)
        if not alive[v] or cur[v] != s:
            continue
        alive[v] = False
        order.append(v)
        ns = _eliminate(adj, v)
        touched = set(ns)
        if strategy == "min_fill":
            for a in ns:
                touched.update(adj[a])
        for a in touched:
            if alive[a]:
                new = score(adj, a)
                if new != cur[a]:
                    cur[a] = new
                    heapq.heappush(heap, (new, a))
    return order


def order_width(n: int, arcs: Iterable[tuple[int, int]], order: Sequence[int]) -> int:
    adj = _undirected(n, arcs)
    width = -1
    for v in order:
        width = max(width, len(adj[v]))
        _eliminate(adj, v)
    return width


def _exact_order(n: int, arcs: Iterable[tuple[int, int]], upper: int, fallback: list[int]) -> list[int]:
    """Branch and bound over elimination orderings, for small graphs.

    The graph left after eliminating a vertex set does not depend on the
    order of elimination, so failed remaining-sets are memoised.
    """
    base = [0] * n
    for a, b in arcs:
        if a != b:
            base[a] |= 1 << b
            base[b] |= 1 << a
    lower = peel_degeneracy({v: set(iter_bits(base[v])) for v in range(n)})

    def eliminate(adj: dict[int, int], v: int) -> dict[int, int]:
        nb = adj[v]
        out = {}
        for u, mask in adj.items():
            if u == v:
                continue
            mask &= ~(1 << v)
            if (nb >> u) & 1:
                mask |= nb & ~(1 << u)
            out[u] = mask
        return out

    def feasible(target: int):
        failed: set[int] = set()

        def search(adj: dict[int, int], remaining: int):
            if len(adj) <= target + 1:
                return list(adj)
            if remaining in failed:
                return None
            candidates = []
            for v in sorted(adj):
                nb = adj[v]
                deg = bin(nb).count("1")
                if deg > target:
                    continue
                simplicial = all((adj[u] | (1 << u)) & nb == nb for u in iter_bits(nb))
                if simplicial:
                    candidates = [v]
                    break
                candidates.append(v)
            for v in candidates:
                rest = search(eliminate(adj, v), remaining & ~(1 << v))
                if rest is not None:
                    return [v] + rest
            failed.add(remaining)
            return None

        return search({v: base[v] for v in range(n)}, (1 << n) - 1)

    for target in range(max(lower, 0), upper):
        found = feasible(target)
        if found is not None:
            return found
    return fallback


def decomposition_from_order(n: int, arcs: Iterable[tuple[int, int]], order: Sequence[int]) -> TreeDecomposition:
    """Bags are the maximal cliques of the filled graph, linked as a clique tree.

    A maximum-weight spanning tree of the clique intersection graph is a valid
    clique tree; zero-weight links join components into a path.
    """
    adj = _undirected(n, arcs)
    raw = []
    for v in order:
        raw.append(frozenset([v, *adj[v]]))
        _eliminate(adj, v)
    maximal = []
    for bag in sorted(set(raw), key=lambda b: (-len(b), sorted(b))):
        if not any(bag <= other for other in maximal):
            maximal.append(bag)
    if not maximal:
        return TreeDecomposition(((),), ())
    bags = [tuple(sorted(b)) for b in maximal]
    holders: dict[int, list[int]] = {}
    for i, bag in enumerate(bags):
        for v in bag:
            holders.setdefault(v, []).append(i)
    candidates = set()
    for hs in holders.values():
        for x in range(len(hs)):
            for y in range(x + 1, len(hs)):
                candidates.add((hs[x], hs[y]))
    weighted = sorted(
        (-len(maximal[i] & maximal[j]), i, j) for i, j in candidates
    )
    parent = list(range(len(bags)))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    edges = []
    for _, i, j in weighted:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
            edges.append((i, j))
    edges += _chain_components(len(bags), edges)
    return _reorder_from_leaf(TreeDecomposition(tuple(bags), tuple(edges)))


def _chain_components(m: int, edges: list[tuple[int, int]]) -> list[tuple[int, int]]:
    adj: list[list[int]] = [[] for _ in range(m)]
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    comp = [-1] * m
    ends = []
    for s in range(m):
        if comp[s] >= 0:
            continue
        comp[s] = s
        stack = [s]
        members = []
        while stack:
            x = stack.pop()
            members.append(x)
            for y in adj[x]:
                if comp[y] < 0:
                    comp[y] = s
                    stack.append(y)
        leaves = [x for x in members if len(adj[x]) <= 1]
        ends.append((min(leaves), max(leaves)))
    return [(ends[i][1], ends[i + 1][0]) for i in range(len(ends) - 1)]


def _reorder_from_leaf(td: TreeDecomposition) -> TreeDecomposition:
    """Renumber bags breadth-first from a tree leaf, so bag 0 is a leaf."""
    adj = td.adjacency()
    start = next((i for i, ns in enumerate(adj) if len(ns) <= 1), 0)
    order = [start]
    seen = {start}
    for x in order:
        for y in sorted(adj[x]):
            if y not in seen:
                seen.add(y)
                order.append(y)
    pos = {old: new for new, old in enumerate(order)}
    return TreeDecomposition(
        tuple(td.bags[i] for i in order), tuple((pos[a], pos[b]) for a, b in td.edges)
    )


def decompose(n: int, arcs: Iterable[tuple[int, int]], strategy: str = "min_fill") -> TreeDecomposition:
    arcs = list(arcs)
    if strategy not in STRATEGIES:
        raise DecompositionError(f"unknown strategy {strategy!r}")
    if strategy == "exact_small":
        if n > EXACT_LIMIT:
            raise DecompositionError(f"exact search is capped at {EXACT_LIMIT} vertices, got {n}")
        best = min(
            (elimination_order(n, arcs, s) for s in ("min_fill", "min_degree")),
            key=lambda o: order_width(n, arcs, o),
        )
        order = _exact_order(n, arcs, order_width(n, arcs, best), best)
    else:
        order = elimination_order(n, arcs, strategy)
    return decomposition_from_order(n, arcs, order)


def treewidth_exact(n: int, arcs: Iterable[tuple[int, int]]) -> int:
    return decompose(n, arcs, "exact_small").width()


# -- nice form ----------------------------------------------------------------

def compress(td: TreeDecomposition, keep: int = 0) -> tuple[TreeDecomposition, int]:
    """Contract tree edges whose bags are nested; returns the new index of ``keep``."""
    bags = [set(b) for b in td.bags]
    adj = [set(ns) for ns in td.adjacency()]
    alive = [True] * len(bags)
    owner = list(range(len(bags)))
    changed = True
    while changed:
        changed = False
        for a in range(len(bags)):
            if not alive[a]:
                continue
            for b in sorted(adj[a]):
                if bags[b] <= bags[a]:
                    small, big = b, a
                elif bags[a] <= bags[b]:
                    small, big = a, b
                else:
                    continue
                for c in adj[small]:
                    if c != big:
                        adj[c].discard(small)
                        adj[c].add(big)
                        adj[big].add(c)
                adj[big].discard(small)
                adj[small] = set()
                alive[small] = False
                owner[small] = big
                changed = True
                break
    kept = [i for i in range(len(bags)) if alive[i]]
    pos = {old: new for new, old in enumerate(kept)}
    edges = {(min(pos[a], pos[b]), max(pos[a], pos[b])) for a in kept for b in adj[a]}
    root = keep
    while owner[root] != root:
        root = owner[root]
    return TreeDecomposition(tuple(tuple(bags[i]) for i in kept), tuple(edges)), pos[root]


class _Draft:
    __slots__ = ("kind", "bag", "kids", "vertex", "size")

    def __init__(self, kind, bag, kids=(), vertex=None):
        self.kind, self.bag, self.kids, self.vertex = kind, tuple(sorted(bag)), tuple(kids), vertex
        self.size = 1 + sum(k.size for k in kids)


def _forget(node: _Draft, cur: set, keep) -> _Draft:
    for v in sorted(cur - set(keep)):
        cur.discard(v)
        node = _Draft("forget", cur, (node,), v)
    return node


def _introduce(node: _Draft, cur: set, want) -> _Draft:
    for v in sorted(set(want) - cur):
        cur.add(v)
        node = _Draft("introduce", cur, (node,), v)
    return node


class _Nicifier:
    """Builds the nice form bottom-up, merging each bag's children into one chain.

    At a bag X the children arrive with tops equal to their separators with X.
    They are attached one at a time, cheapest first, and a vertex of X is
    forgotten as soon as no pending child and no ancestor needs it, so later
    branches are lifted to smaller bags. Children whose subtree is a path are
    threaded through the chain when the bag size allows, instead of joined.
    """

    def __init__(self, bags, kids, cap):
        self.bags, self.kids, self.cap = bags, kids, cap
        self.is_path: dict[int, bool] = {}
        self.built: dict[int, _Draft] = {}

    def path_bags(self, c):
        out = [self.bags[c]]
        while self.kids[c]:
            (c,) = self.kids[c]
            out.append(self.bags[c])
        return out

    def thread(self, node, cur, needed, c, dry):
        """Walk the chain down through the path below ``c``; None if a bag would overflow.

        ``needed(v)`` tells whether v must survive once the path is done.
        """
        ys = self.path_bags(c)
        t = set(cur)
        cost = 0
        for i, y in enumerate(ys):
            if len(t | y) > self.cap:
                return None
            nxt = ys[i + 1] if i + 1 < len(ys) else frozenset()
            keep = {v for v in t | y if v in nxt or needed(v)}
            if dry:
                cost += len(y - t) + len((t | y) - keep)
                t = keep
            else:
                node = _introduce(node, t, y)
                node = _forget(node, t, keep)
        if dry:
            return cost
        cur.clear()
        cur.update(t)
        return node

    def merge(self, x, sep, start):
        X = self.bags[x]
        pending = {c: self.bags[c] & X for c in self.kids[x]}
        if start is None:
            node, cur = _Draft("leaf", X), set(X)
        else:
            cur = set(pending.pop(start))
            node = _introduce(self.built[start], cur, X)
        count: dict[int, int] = {}
        for s in pending.values():
            for v in s:
                count[v] = count.get(v, 0) + 1
        while True:
            node = _forget(node, cur, {v for v in cur if v in sep or count.get(v, 0)})
            if not pending:
                return node
            best = None
            for c, s in sorted(pending.items()):
                branch = len(cur - s) + 1
                key = (branch, 0, c)
                if self.is_path[c]:
                    cost = self.thread(
                        None, cur, lambda v, s=s: v in sep or count.get(v, 0) > (v in s), c, dry=True
                    )
                    if cost is not None and cost - self.built[c].size < branch:
                        key = (cost - self.built[c].size, 1, c)
                if best is None or key < best:
                    best = key
            _, threaded, c = best
            s = pending.pop(c)
            for v in s:
                count[v] -= 1
            if threaded:
                node = self.thread(node, cur, lambda v: v in sep or count.get(v, 0) > 0, c, dry=False)
            else:
                t = set(s)
                other = _introduce(self.built[c], t, cur)
                node = _Draft("join", cur, (node, other))

    def build(self, x, sep):
        # start from a fresh leaf, or lift a child up to X; on bags with many
        # children only the widest few are tried, to keep the cost near linear
        wide = sorted(self.kids[x], key=lambda c: (-len(self.bags[c] & self.bags[x]), c))
        if len(wide) > 12:
            wide = wide[:4]
        best = None
        for start in [None, *wide]:
            node = self.merge(x, sep, start)
            if best is None or node.size < best.size:
                best = node
        return best


def to_nice(td: TreeDecomposition, graph: tuple[int, Iterable[tuple[int, int]]] | None = None) -> NiceTreeDecomposition:
    """Nice form with the same width, rooted at the node holding bag 0.

    Leaf bags are kept whole rather than padded from empty leaves, and the
    root keeps its full bag.
    """
    if graph is not None:
        problems = validate_decomposition(graph[0], graph[1], td)
    else:
        problems = _tree_shape_problems(td) or _occurrence_problems(td)
    if problems:
        raise DecompositionError("invalid tree decomposition: " + "; ".join(problems))
    small, root = compress(td, 0)
    adj = small.adjacency()
    bags = [frozenset(b) for b in small.bags]
    kids: list[list[int]] = [[] for _ in bags]
    order, parent = [root], {root: -1}
    for x in order:
        for y in sorted(adj[x]):
            if y != parent[x]:
                parent[y] = x
                kids[x].append(y)
                order.append(y)
    nic = _Nicifier(bags, kids, max(len(b) for b in bags))
    for x in reversed(order):
        nic.is_path[x] = len(kids[x]) <= 1 and all(nic.is_path[c] for c in kids[x])
        sep = bags[x] if x == root else bags[x] & bags[parent[x]]
        nic.built[x] = nic.build(x, sep)
    # flatten to post-order, root last
    nodes: list[NiceNode] = []
    index: dict[int, int] = {}
    stack = [(nic.built[root], False)]
    while stack:
        d, done = stack.pop()
        if not done:
            stack.append((d, True))
            stack.extend((k, False) for k in reversed(d.kids))
            continue
        index[id(d)] = len(nodes)
        nodes.append(NiceNode(d.kind, d.bag, tuple(index[id(k)] for k in d.kids), d.vertex))
    return NiceTreeDecomposition(tuple(nodes))


# -- file format --------------------------------------------------------------

def parse_td(text: str, names: Sequence[str]) -> TreeDecomposition:
    """Read the ``s td`` line format; bag ids are 1-based, vertices by name."""
    from .model import ParseError

    index = {name: i for i, name in enumerate(names)}
    header = None
    bags: dict[int, tuple[int, ...]] = {}
    edges = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line or line.startswith("c "):
            continue
        tok = line.split()
        if header is None:
            if tok[:2] != ["s", "td"] or len(tok) != 5:
                raise ParseError("expected 's td <num_bags> <max_bag_size> <num_vertices>' first", lineno)
            try:
                header = tuple(int(t) for t in tok[2:])
            except ValueError:
                raise ParseError("non-integer field in 's td' line", lineno) from None
            continue
        if tok[0] == "b":
            try:
                bag_id = int(tok[1])
            except (IndexError, ValueError):
                raise ParseError("expected 'b <bag_id> <user>...'", lineno) from None
            if not 1 <= bag_id <= header[0] or bag_id in bags:
                raise ParseError(f"bad or repeated bag id {bag_id}", lineno)
            members = []
            for name in tok[2:]:
                if name not in index:
                    raise ParseError(f"unknown user {name!r}", lineno)
                members.append(index[name])
            bags[bag_id] = tuple(members)
        else:
            if len(tok) != 2:
                raise ParseError("expected a tree edge '<bag_id> <bag_id>'", lineno)
            try:
                a, b = int(tok[0]), int(tok[1])
            except ValueError:
                raise ParseError("non-integer bag id in tree edge", lineno) from None
            edges.append((a - 1, b - 1))
    if header is None:
        raise ParseError("missing 's td' header")
    if len(bags) != header[0]:
        raise ParseError(f"header declares {header[0]} bags, found {len(bags)}")
    if header[2] != len(names):
        raise ParseError(f"header declares {header[2]} vertices, instance has {len(names)}")
    ordered = tuple(bags[i] for i in range(1, header[0] + 1))
    if ordered and max(len(b) for b in ordered) > header[1]:
        raise ParseError("a bag exceeds the declared maximum bag size")
    return TreeDecomposition(ordered, tuple(edges))


def serialize_td(td: TreeDecomposition, names: Sequence[str]) -> str:
    size = max((len(b) for b in td.bags), default=0)
    out = [f"s td {len(td.bags)} {size} {len(names)}"]
    for i, bag in enumerate(td.bags, 1):
        out.append(" ".join(["b", str(i), *(names[v] for v in bag)]))
    out += [f"{a + 1} {b + 1}" for a, b in td.edges]
    return "\n".join(out) + "\n"
