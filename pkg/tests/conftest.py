import random

import pytest

from flipgraph.moves import (
    apply_flip,
    apply_pairwise_reduction,
    apply_plus,
    enumerate_flips,
    enumerate_plus_pairs,
    find_pairwise_reductions,
)
from flipgraph.scheme import Scheme, standard_scheme


# PASS/FAIL lines from test_acceptance.py, echoed in the terminal summary
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)


def mutate(s: Scheme, rng: random.Random) -> Scheme:
    """Random damage: flip one bit, drop or duplicate a term, or swap two components."""
    terms = [list(t) for t in s.terms]
    kind = rng.randrange(4)
    k = rng.randrange(len(terms))
    if kind == 0:
        slot = rng.randrange(3)
        terms[k][slot] ^= 1 << rng.randrange(s.lengths[slot])
    elif kind == 1:
        del terms[k]
    elif kind == 2:
        terms.append(list(terms[k]))
    else:
        slot = rng.randrange(3)
        j = rng.randrange(len(terms))
        terms[k][slot], terms[j][slot] = terms[j][slot], terms[k][slot]
    return s.with_terms(tuple(tuple(t) for t in terms))


def random_walk(s: Scheme, steps: int, rng: random.Random, plus_rate: float = 0.1) -> Scheme:
    """Pure-Python walk over flips, plus moves and reductions; used to make test schemes."""
    for _ in range(steps):
        if rng.random() < plus_rate:
            pl = enumerate_plus_pairs(s)
            if pl:
                s = apply_plus(s, rng.choice(pl))
        else:
            fl = enumerate_flips(s)
            if fl:
                s = apply_flip(s, rng.choice(fl))
        red = find_pairwise_reductions(s)
        while red:
            i, j, _ = red[0]
            s = apply_pairwise_reduction(s, i, j)
            red = find_pairwise_reductions(s)
    return s


def scheme_corpus(count: int, seed: int, dims_choices, max_steps: int = 40):
    rng = random.Random(seed)
    out = []
    for _ in range(count):
        dims = rng.choice(dims_choices)
        out.append(random_walk(standard_scheme(*dims), rng.randint(0, max_steps), rng))
    return out


@pytest.fixture
def small_corpus():
    return scheme_corpus(40, 7, [(2, 2, 2), (2, 2, 3), (2, 3, 2), (3, 2, 2)])
