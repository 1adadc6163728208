import random
from pathlib import Path

import pytest

from wspfpt.model import UserPoset, load_instance
from wspfpt.oracle import random_dag_arcs

DATA = Path(__file__).resolve().parent.parent / "data"

RHUL_NAMES = ["Principal", "VP1", "VP2", "VP3", "Dean1", "Dean2", "Dean3"]


@pytest.fixture
def data_dir():
    return DATA


@pytest.fixture
def expenses():
    return load_instance(DATA / "expenses.wsp")


@pytest.fixture
def expenses_neq():
    return load_instance(DATA / "expenses_neq.wsp")


@pytest.fixture
def rhul():
    return load_instance(DATA / "rhul.wsp").users


def rhul_ids(poset):
    return {name: poset.index(name) for name in RHUL_NAMES}


def random_poset(seed, n_max=12, density=None):
    rng = random.Random(seed)
    n = rng.randint(1, n_max)
    d = rng.random() if density is None else density
    arcs = random_dag_arcs(rng, n, d)
    return UserPoset([f"u{i}" for i in range(n)], arcs), arcs


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
