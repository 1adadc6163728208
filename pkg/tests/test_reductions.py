import itertools
import random

import pytest

from wspfpt.model import Kind, ParseError, check_plan, parse_instance, serialize_instance
from wspfpt.oracle import BudgetExceeded, brute_force_solve
from wspfpt.order import degeneracy, is_transitive
from wspfpt.reductions import (
    PsiInstance,
    ReductionError,
    SubTdagInstance,
    brute_force_psi,
    brute_force_subtdag,
    gen_random_psi,
    parse_psi,
    parse_std,
    reduce_psi_to_subtdag,
    reduce_subtdag_to_wsp,
    serialize_psi,
    serialize_std,
    structural_report,
)

BIG = 10**30


def psi(pattern_edges, l, host_edges, classes):
    return PsiInstance(
        tuple(f"g{i}" for i in range(l)), frozenset(pattern_edges),
        tuple(f"x{i}" for i in range(len(classes))), frozenset(host_edges), tuple(classes),
    )


def triangle_into_k4(yes=True):
    # host K4 minus (optionally) the edges that a triangle needs
    classes = [0, 1, 2, 2]
    host = set(itertools.combinations(range(4), 2))
    if not yes:
        host -= {(0, 2), (0, 3)}
    return psi({(0, 1), (1, 2), (0, 2)}, 3, host, classes)


def test_triangle_pattern_shape():
    st = reduce_psi_to_subtdag(triangle_into_k4())
    assert len(st.r_names) == 6 and len(st.r_arcs) == 6
    heads = {b for _, b in st.r_arcs}
    tails = {a for a, _ in st.r_arcs}
    assert not heads & tails  # no directed path of length 2


def test_single_edge():
    p = psi({(0, 1)}, 2, {(0, 1)}, [0, 1])
    st = reduce_psi_to_subtdag(p)
    assert len(st.r_names) == 3
    assert st.r_arcs == {(0, 2), (1, 2)}
    inst = reduce_subtdag_to_wsp(st)
    assert inst.k == 3
    lts = sorted((c.s1, c.s2) for c in inst.constraints if c.kind is Kind.LT)
    neqs = sorted((c.s1, c.s2) for c in inst.constraints if c.kind is Kind.NEQ)
    assert lts == [(0, 2), (1, 2)] and neqs == [(0, 1)]


def test_targets_and_auth():
    st = reduce_psi_to_subtdag(triangle_into_k4())
    assert [(w, sorted(ts)) for w, ts in st.targets] == [(0, [0]), (1, [1]), (2, [2, 3])]
    inst = reduce_subtdag_to_wsp(st)
    assert inst.auth[2] == {2, 3}
    assert inst.auth[3] == frozenset(range(len(st.d_names)))
    assert inst.users.closure == st.d_arcs


def test_isolated_pattern_vertex_rejected():
    with pytest.raises(ReductionError, match="isolated"):
        reduce_psi_to_subtdag(psi({(0, 1)}, 3, set(), [0, 1, 2]))


def test_yes_and_no_triangles():
    for yes in (True, False):
        p = triangle_into_k4(yes)
        st = reduce_psi_to_subtdag(p)
        inst = reduce_subtdag_to_wsp(st)
        answers = [brute_force_psi(p), brute_force_subtdag(st, BIG), brute_force_solve(inst, BIG)]
        assert [a is not None for a in answers] == [yes] * 3


def test_triangle_free_host():
    # host is a 6-cycle, classes alternate; a triangle cannot embed
    p = psi({(0, 1), (1, 2), (0, 2)}, 3, {(i, (i + 1) % 6) for i in range(6)}, [0, 1, 2, 0, 1, 2])
    st = reduce_psi_to_subtdag(p)
    assert brute_force_psi(p) is None
    assert brute_force_subtdag(st, BIG) is None
    assert brute_force_solve(reduce_subtdag_to_wsp(st), BIG) is None


def test_oracle_trivial_cases():
    one = PsiInstance(("g",), frozenset(), ("a", "b"), frozenset(), (0, 0))
    assert brute_force_psi(one) == {0: 0}
    no_edge = psi({(0, 1)}, 2, set(), [0, 1])
    assert brute_force_psi(no_edge) is None


def test_budget_guard():
    st = reduce_psi_to_subtdag(triangle_into_k4())
    with pytest.raises(BudgetExceeded):
        brute_force_subtdag(st, budget=10)


def test_structure_checks():
    bad = SubTdagInstance(("a", "b", "c"), frozenset({(0, 1), (1, 2)}), ("x",), frozenset(), ())
    assert "R is not transitive" in bad.problems()
    with pytest.raises(ReductionError):
        reduce_subtdag_to_wsp(bad)
    overlap = SubTdagInstance(
        ("a", "b"), frozenset(), ("x",), frozenset(), ((0, frozenset({0})), (1, frozenset({0})))
    )
    assert any("overlaps" in p for p in overlap.problems())


@pytest.mark.parametrize("seed", range(60))
def test_chain_agreement_and_structure(seed):
    rng = random.Random(seed)
    l = rng.randint(2, 7)
    p = gen_random_psi(seed, l, rng.randint(l, 10))
    assert not p.isolated()
    st = reduce_psi_to_subtdag(p)
    rep = structural_report(st)
    assert rep["r_transitive"] and rep["d_transitive"]
    assert rep["r_degeneracy"] <= 2 and rep["d_degeneracy"] <= 2
    inst = reduce_subtdag_to_wsp(st)
    a, b, c = brute_force_psi(p), brute_force_subtdag(st, BIG), brute_force_solve(inst, BIG)
    assert (a is None) == (b is None) == (c is None)
    if c is not None:
        assert check_plan(inst, c) == []
        # the embedding of the pattern part must be a valid psi witness
        assert all(c[g] in {x for x, k in enumerate(p.host_class) if k == g} for g in range(l))


def test_generator_deterministic_and_planted():
    assert gen_random_psi(3, 4, 8) == gen_random_psi(3, 4, 8)
    for seed in range(20):
        assert brute_force_psi(gen_random_psi(seed, 4, 8, plant=True)) is not None


def test_generator_rejects_bad_sizes():
    with pytest.raises(ValueError):
        gen_random_psi(0, 3, 2)


def test_psi_roundtrip():
    p = gen_random_psi(5, 4, 9)
    assert parse_psi(serialize_psi(p)) == p


def test_std_roundtrip():
    st = reduce_psi_to_subtdag(gen_random_psi(6, 3, 7))
    assert parse_std(serialize_std(st)) == st


def test_wsp_output_reparses():
    inst = reduce_subtdag_to_wsp(reduce_psi_to_subtdag(gen_random_psi(8, 3, 6)))
    assert parse_instance(serialize_instance(inst)) == inst


@pytest.mark.parametrize(
    "text, needle",
    [
        ("g a\n", "expected 'p psi"),
        ("p psi 1 1\ng a\nh x b\n", "unknown vertex"),
        ("p psi 2 1\ng a\nh x a\n", "header declares"),
        ("p psi 1 1\ng a\nh x a\nzz 1\n", "unexpected line"),
    ],
)
def test_psi_parse_errors(text, needle):
    with pytest.raises(ParseError, match=needle):
        parse_psi(text)


def test_std_parse_rejects_non_transitive():
    text = "p std 3 1\nr a\nr b\nr c\nd x\nar a b\nar b c\n"
    with pytest.raises(ParseError, match="not transitive"):
        parse_std(text)


def test_degeneracy_of_subdivision_is_two():
    # subdividing K5 still gives degeneracy 2
    p = psi(set(itertools.combinations(range(5), 2)), 5, set(), [0, 1, 2, 3, 4])
    st = reduce_psi_to_subtdag(p)
    assert degeneracy(st.r_arcs, range(len(st.r_names))) == 2
    assert is_transitive(st.r_arcs)
