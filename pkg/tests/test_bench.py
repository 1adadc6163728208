import math

import pytest

from wspfpt.bench import FIELDS, bench_instance, loglog_slope, median_by_n, run_cell, sweep, to_csv
from wspfpt.model import check_plan
from wspfpt.oracle import brute_force_solve
from wspfpt.treedecomp import decompose


def test_instance_shape():
    inst = bench_instance(4, 2, 30, seed=1)
    assert inst.k == 4 and inst.n == 30
    assert decompose(inst.n, sorted(inst.users.cover_arcs), "min_fill").width() <= 2
    assert bench_instance(4, 2, 30, seed=1) == inst


@pytest.mark.parametrize("seed", range(8))
def test_small_cells_match_oracle(seed):
    inst = bench_instance(3, 2, 7, seed)
    row = run_cell(3, 2, 7, 0, seed)
    assert row.sat == (brute_force_solve(inst) is not None)


def test_sweep_and_csv():
    rows = sweep([2], [1, 2], [10, 20], reps=2, seed=3)
    assert len(rows) == 8
    text = to_csv(rows).splitlines()
    assert text[0] == ",".join(FIELDS)
    assert len(text) == 9
    assert all(r.nodes <= 4 * r.n for r in rows)
    assert sweep([2], [1], [10], seed=3)[0].seed == rows[0].seed


def test_slope_of_power_law():
    ns = [50, 100, 200, 400]
    assert loglog_slope(ns, [3e-4 * n**1.5 for n in ns]) == pytest.approx(1.5)
    assert loglog_slope(ns, [2.0] * 4) == pytest.approx(0.0)


def test_slope_needs_two_sizes():
    with pytest.raises(ValueError):
        loglog_slope([5, 5], [1.0, 2.0])


def test_median_by_n():
    rows = sweep([2], [1], [10, 20], reps=3, seed=0)
    ns, meds = median_by_n(rows)
    assert ns == [10, 20]
    assert all(math.isfinite(m) and m >= 0 for m in meds)
