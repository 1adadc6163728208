import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st

from wspfpt.model import ParseError, UserPoset
from wspfpt.oracle import random_dag_arcs
from wspfpt.preprocess import contract_equalities
from wspfpt.treedecomp import (
    EXACT_LIMIT,
    DecompositionError,
    TreeDecomposition,
    compress,
    decompose,
    elimination_order,
    order_width,
    parse_td,
    serialize_td,
    to_nice,
    treewidth_exact,
    validate_decomposition,
    validate_nice,
)

from conftest import random_poset


def brute_treewidth(n, arcs):
    """Minimum over every elimination order, written out plainly."""
    if n == 0:
        return -1
    base = [set() for _ in range(n)]
    for a, b in arcs:
        base[a].add(b)
        base[b].add(a)
    best = n - 1
    for order in itertools.permutations(range(n)):
        adj = [set(s) for s in base]
        worst = 0
        for v in order:
            ns = adj[v]
            worst = max(worst, len(ns))
            for a in ns:
                adj[a] |= ns - {a}
                adj[a].discard(v)
            adj[v] = set()
            if worst >= best:
                break
        best = min(best, worst)
    return best


def bags_meeting(td, ys):
    return {i for i, b in enumerate(td.bags) if set(b) & ys}


def is_connected_subtree(td, nodes):
    if not nodes:
        return True
    adj = td.adjacency()
    start = next(iter(nodes))
    seen, stack = {start}, [start]
    while stack:
        x = stack.pop()
        for y in adj[x]:
            if y in nodes and y not in seen:
                seen.add(y)
                stack.append(y)
    return seen == nodes


# -- validation ---------------------------------------------------------------

@pytest.fixture
def expenses_graph(expenses):
    cg = contract_equalities(expenses)
    names = {n: i for i, n in enumerate(expenses.step_names)}
    return names, sorted(cg.neq_edges | cg.lt_arcs)


def test_expenses_constraint_graph_width_two(expenses_graph):
    ids, edges = expenses_graph
    td = TreeDecomposition(
        ((ids["AppC"], ids["PrepC"], ids["PrepP"]), (ids["AppC"], ids["AppP"], ids["PrepP"])), ((0, 1),)
    )
    assert validate_decomposition(4, edges, td) == []
    assert td.width() == 2


def test_uncovered_vertex(expenses_graph):
    ids, edges = expenses_graph
    td = TreeDecomposition(((ids["AppC"], ids["PrepC"], ids["PrepP"]), (ids["AppC"], ids["PrepP"])), ((0, 1),))
    problems = validate_decomposition(4, edges, td)
    assert f"condition 1: vertex {ids['AppP']} is in no bag" in problems


def test_disconnected_occurrence():
    td = TreeDecomposition(((0, 1), (1, 2), (2, 0)), ((0, 1), (1, 2)))
    problems = validate_decomposition(3, [(0, 1), (1, 2)], td)
    assert problems == ["condition 3: bags containing vertex 0 are not connected"]


def test_uncovered_arc():
    td = TreeDecomposition(((0,), (1,)), ((0, 1),))
    assert validate_decomposition(2, [(0, 1)], td) == ["condition 2: arc (0, 1) is in no bag"]


@pytest.mark.parametrize(
    "bags, edges, needle",
    [
        (((0,), (1,)), (), "not a tree"),
        (((0,), (1,), (2,)), ((0, 1), (0, 1)), "duplicate"),
        (((0,), (1,)), ((0, 5),), "not between"),
        ((), (), "no bags"),
    ],
)
def test_tree_shape(bags, edges, needle):
    problems = validate_decomposition(3, [], TreeDecomposition(bags, edges))
    assert any(needle in p for p in problems)


# -- width --------------------------------------------------------------------

def test_rhul_file_decomposition(rhul, data_dir):
    td = parse_td((data_dir / "rhul.td").read_text(), rhul.names)
    assert len(td.bags) == 4 and all(len(b) == 4 for b in td.bags)
    assert td.width() == 3
    assert validate_decomposition(rhul.n, rhul.cover_arcs, td) == []


def test_single_bag_width():
    assert TreeDecomposition(((3,),), ()).width() == 0


def test_empty_width_raises():
    with pytest.raises(DecompositionError):
        TreeDecomposition((), ()).width()


# -- construction -------------------------------------------------------------

@pytest.mark.parametrize("strategy", ["min_degree", "min_fill", "exact_small"])
def test_path_has_width_one(strategy):
    arcs = [(i, i + 1) for i in range(4)]
    td = decompose(5, arcs, strategy)
    assert validate_decomposition(5, arcs, td) == []
    assert td.width() == 1


@pytest.mark.parametrize("strategy", ["min_degree", "min_fill", "exact_small"])
def test_edgeless_has_width_zero(strategy):
    td = decompose(4, [], strategy)
    assert td.width() == 0
    assert validate_decomposition(4, [], td) == []


def test_tree_has_width_one():
    rng = random.Random(5)
    arcs = [(v, rng.randrange(v)) for v in range(1, 30)]
    for strategy in ("min_degree", "min_fill"):
        assert decompose(30, arcs, strategy).width() == 1


def test_rhul_exact_width_three(rhul):
    td = decompose(rhul.n, rhul.cover_arcs, "exact_small")
    assert td.width() == 3
    assert validate_decomposition(rhul.n, rhul.cover_arcs, td) == []
    assert brute_treewidth(rhul.n, rhul.cover_arcs) == 3


def test_exact_cap():
    with pytest.raises(DecompositionError, match="capped"):
        decompose(EXACT_LIMIT + 1, [], "exact_small")


def test_unknown_strategy():
    with pytest.raises(DecompositionError):
        decompose(3, [], "magic")


def test_min_degree_order_tie_break():
    # a 4-cycle: every vertex has degree 2, so the lowest id goes first
    assert elimination_order(4, [(0, 1), (1, 2), (2, 3), (3, 0)], "min_degree")[0] == 0


@pytest.mark.parametrize("seed", range(40))
def test_exact_matches_brute_force(seed):
    poset, _ = random_poset(seed, n_max=7)
    arcs = sorted(poset.cover_arcs)
    assert treewidth_exact(poset.n, arcs) == brute_treewidth(poset.n, arcs)


@pytest.mark.parametrize("seed", range(40))
def test_exact_never_worse_than_heuristics(seed):
    poset, _ = random_poset(seed, n_max=16)
    arcs = sorted(poset.cover_arcs)
    exact = decompose(poset.n, arcs, "exact_small")
    assert validate_decomposition(poset.n, arcs, exact) == []
    for strategy in ("min_degree", "min_fill"):
        heuristic = decompose(poset.n, arcs, strategy)
        assert exact.width() <= heuristic.width()
        assert heuristic.width() == order_width(poset.n, arcs, elimination_order(poset.n, arcs, strategy))


def test_heuristics_valid_on_random_dags():
    for seed in range(60):
        poset, _ = random_poset(seed, n_max=60)
        arcs = sorted(poset.cover_arcs)
        for strategy in ("min_degree", "min_fill"):
            assert validate_decomposition(poset.n, arcs, decompose(poset.n, arcs, strategy)) == []


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.data())
def test_connected_sets_meet_connected_subtrees(seed, data):
    poset, _ = random_poset(seed, n_max=20)
    arcs = sorted(poset.cover_arcs)
    td = decompose(poset.n, arcs, data.draw(st.sampled_from(["min_degree", "min_fill"])))
    adj = {v: set() for v in range(poset.n)}
    for a, b in arcs:
        adj[a].add(b)
        adj[b].add(a)
    # grow a random connected set from a random start
    ys = {data.draw(st.integers(0, poset.n - 1))}
    for _ in range(data.draw(st.integers(0, poset.n))):
        frontier = sorted({w for y in ys for w in adj[y]} - ys)
        if not frontier:
            break
        ys.add(data.draw(st.sampled_from(frontier)))
    assert is_connected_subtree(td, bags_meeting(td, ys))


# -- nice form ----------------------------------------------------------------

def test_single_bag_nice():
    td = TreeDecomposition(((0, 1),), ())
    ntd = to_nice(td, (2, [(0, 1)]))
    assert validate_nice(ntd) == []
    assert ntd.width() == 1
    assert ntd.nodes[ntd.root].bag == (0, 1)


def test_rhul_nice(rhul, data_dir):
    td = parse_td((data_dir / "rhul.td").read_text(), rhul.names)
    ntd = to_nice(td, (rhul.n, rhul.cover_arcs))
    assert validate_nice(ntd) == []
    assert validate_decomposition(rhul.n, rhul.cover_arcs, ntd.as_tree_decomposition()) == []
    assert ntd.width() == 3
    assert len(ntd.nodes) <= 4 * rhul.n
    assert ntd.nodes[ntd.root].bag == td.bags[0]


def test_invalid_input_rejected():
    with pytest.raises(DecompositionError):
        to_nice(TreeDecomposition(((0, 1), (1, 2), (0, 2)), ((0, 1), (1, 2))))


def test_compress_merges_nested_bags():
    td = TreeDecomposition(((0, 1), (0, 1, 2), (2,), (2, 3)), ((0, 1), (1, 2), (2, 3)))
    small, root = compress(td, 0)
    assert sorted(small.bags) == [(0, 1, 2), (2, 3)]
    assert small.bags[root] == (0, 1, 2)


def test_nice_nodes_are_well_formed_with_joins():
    # a star of bags around a hub forces join nodes
    bags = ((0, 1, 2),) + tuple((i, i + 3) for i in range(3))
    td = TreeDecomposition(bags, ((0, 1), (0, 2), (0, 3)))
    arcs = [(0, 1), (1, 2), (0, 3), (1, 4), (2, 5)]
    ntd = to_nice(td, (6, arcs))
    assert validate_nice(ntd) == []
    assert validate_decomposition(6, arcs, ntd.as_tree_decomposition()) == []
    assert ntd.width() == 2


@pytest.mark.parametrize("strategy", ["min_degree", "min_fill"])
def test_nice_bounds_on_random_dags(strategy):
    rng = random.Random(11)
    for _ in range(60):
        n = rng.randint(1, 60)
        arcs = random_dag_arcs(rng, n, rng.choice([0.02, 0.05, 0.1, 0.3]) * rng.random() * 2)
        covers = sorted(UserPoset([str(i) for i in range(n)], arcs).cover_arcs)
        td = decompose(n, covers, strategy)
        ntd = to_nice(td, (n, covers))
        assert validate_nice(ntd) == []
        assert validate_decomposition(n, covers, ntd.as_tree_decomposition()) == []
        assert ntd.width() == td.width()
        assert len(ntd.nodes) <= 4 * n


# -- file format --------------------------------------------------------------

def test_td_roundtrip(rhul, data_dir):
    td = parse_td((data_dir / "rhul.td").read_text(), rhul.names)
    assert parse_td(serialize_td(td, rhul.names), rhul.names) == td


@pytest.mark.parametrize(
    "text, needle",
    [
        ("b 1 a\n", "expected 's td"),
        ("s td 1 1 2\nb 1 zz\n", "unknown user"),
        ("s td 2 1 2\nb 1 a\n", "declares 2 bags"),
        ("s td 1 1 3\nb 1 a\n", "3 vertices"),
        ("s td 1 1 2\nb 1 a b\n", "maximum bag size"),
        ("s td 2 1 2\nb 1 a\nb 2 b\n1 x\n", "non-integer"),
        ("s td 1 1 2\nb 3 a\n", "bad or repeated"),
    ],
)
def test_td_parse_errors(text, needle):
    with pytest.raises(ParseError, match=needle):
        parse_td(text, ["a", "b"])


def test_td_comments_skipped():
    td = parse_td("c a comment\ns td 1 2 2\n# another\nb 1 a b\n", ["a", "b"])
    assert td.bags == ((0, 1),)
