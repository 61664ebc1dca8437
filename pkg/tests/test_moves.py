import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flipgraph.gf2 import gf2_rank
from flipgraph.moves import (
    FlipMove,
    MoveError,
    PlusMove,
    Slot,
    apply_flip,
    apply_general_reduction,
    apply_pairwise_reduction,
    apply_plus,
    apply_split,
    enumerate_flips,
    enumerate_plus_pairs,
    find_pairwise_reductions,
    general_reduction,
    group_matrix,
    reduction_groups,
)
from flipgraph.scheme import (
    Scheme,
    alpha_index,
    beta_index,
    component_ranks,
    gamma_index,
    scheme_tensor,
    standard_scheme,
    strassen_scheme,
    verify,
)

from conftest import random_walk, scheme_corpus


def a(i, j):
    return 1 << alpha_index(2, 2, i - 1, j - 1)


def b(j, k):
    return 1 << beta_index(2, 2, j - 1, k - 1)


def c(k, i):
    return 1 << gamma_index(2, 2, k - 1, i - 1)


def flip_oracle(s):
    out = []
    for slot in range(3):
        nx, th = (slot + 1) % 3, (slot + 2) % 3
        for i in range(s.rank):
            for j in range(s.rank):
                ti, tj = s.terms[i], s.terms[j]
                if i != j and ti[slot] == tj[slot] and ti[nx] != tj[nx] and ti[th] != tj[th]:
                    out.append((slot, i, j))
    return out


def plus_oracle(s):
    return [
        (i, j, slot)
        for i in range(s.rank)
        for j in range(s.rank)
        if i != j and all(s.terms[i][q] != s.terms[j][q] for q in range(3))
        for slot in range(3)
    ]


def test_slot_roles_are_cyclic():
    assert Slot.ALPHA.next is Slot.BETA and Slot.ALPHA.third is Slot.GAMMA
    assert Slot.GAMMA.next is Slot.ALPHA and Slot.GAMMA.third is Slot.BETA


def test_standard_222_has_24_flips():
    s = standard_scheme(2, 2, 2)
    flips = enumerate_flips(s)
    assert len(flips) == 24
    assert [tuple(f) for f in flips] == flip_oracle(s)


def test_flip_enumeration_order_and_oracle(small_corpus):
    for s in [strassen_scheme()] + small_corpus:
        assert [tuple(f) for f in enumerate_flips(s)] == flip_oracle(s)
        assert [tuple(m) for m in enumerate_plus_pairs(s)] == plus_oracle(s)


def test_distinct_components_have_no_flips():
    s = Scheme(2, 2, 2, ((1, 1, 1), (2, 2, 2), (4, 4, 4)))
    assert enumerate_flips(s) == []


def test_strassen_flips_match_oracle():
    # Strassen's components are pairwise distinct in every slot, so no flip exists
    s = strassen_scheme()
    for slot in range(3):
        assert len({t[slot] for t in s.terms}) == 7
    assert [tuple(f) for f in enumerate_flips(s)] == flip_oracle(s) == []


def test_flip_example_from_standard():
    s = standard_scheme(2, 2, 2)
    i = s.terms.index((a(1, 1), b(1, 1), c(1, 1)))
    j = s.terms.index((a(1, 1), b(1, 2), c(2, 1)))
    out = apply_flip(s, FlipMove(Slot.ALPHA, i, j))
    assert out.terms[i] == (a(1, 1), b(1, 1) ^ b(1, 2), c(1, 1))
    assert out.terms[j] == (a(1, 1), b(1, 2), c(2, 1) ^ c(1, 1))
    assert verify(out)
    changed = [k for k in range(s.rank) if s.terms[k] != out.terms[k]]
    assert changed == sorted([i, j])


def test_flip_is_an_involution():
    for s in scheme_corpus(20, 11, [(2, 2, 2), (3, 2, 2)]):
        for mv in enumerate_flips(s):
            once = apply_flip(s, mv)
            assert mv in enumerate_flips(once)
            assert apply_flip(once, mv) == s


def test_flip_rank_unchanged_on_many_random_flips():
    rng = random.Random(0)
    s = standard_scheme(3, 3, 3)
    for _ in range(1000):
        s2 = apply_flip(s, rng.choice(enumerate_flips(s)))
        assert s2.rank == s.rank
        s = s2
    assert verify(s)


def test_invalid_flip_rejected():
    s = standard_scheme(2, 2, 2)
    with pytest.raises(MoveError):
        apply_flip(s, FlipMove(Slot.ALPHA, 0, 0))
    with pytest.raises(MoveError):
        apply_flip(s, FlipMove(Slot.ALPHA, 0, 7))


def test_standard_has_no_pairwise_reductions():
    for dims in [(2, 2, 2), (2, 3, 4), (3, 3, 3)]:
        assert find_pairwise_reductions(standard_scheme(*dims)) == []


def test_pairwise_reduction_cases():
    s = Scheme(2, 2, 2, ((1, 2, 4), (1, 2, 8), (3, 3, 3)))
    assert find_pairwise_reductions(s) == [(0, 1, (0, 1))]
    merged = apply_pairwise_reduction(s, 0, 1)
    assert merged.terms == ((1, 2, 12), (3, 3, 3))
    dup = Scheme(2, 2, 2, ((1, 2, 4), (5, 5, 5), (1, 2, 4)))
    assert find_pairwise_reductions(dup) == [(0, 2, (0, 1, 2))]
    gone = apply_pairwise_reduction(dup, 0, 2)
    assert gone.terms == ((5, 5, 5),)
    with pytest.raises(MoveError):
        apply_pairwise_reduction(s, 0, 2)


def test_pairwise_reduction_preserves_validity():
    # a flip that would zero a component corresponds to a reduction
    rng = random.Random(2)
    hits = 0
    for s in scheme_corpus(60, 4, [(2, 2, 2), (2, 2, 3)], max_steps=20):
        for mv in enumerate_flips(s):
            t = apply_flip(s, mv)
            for i, j, _ in find_pairwise_reductions(t):
                r = apply_pairwise_reduction(t, i, j)
                assert verify(r)
                assert t.rank - r.rank in (1, 2)
                hits += 1
    assert hits > 0


def test_general_reduction_example():
    al = a(1, 1)
    b1, b2 = b(1, 1), b(1, 2)
    g1, g2, g3 = c(1, 1), c(2, 1), c(1, 2)
    s = Scheme(2, 2, 2, ((al, b1, g1), (al, b2, g2), (al, b1 ^ b2, g3)))
    assert gf2_rank(group_matrix(s, Slot.ALPHA, [0, 1, 2])) == 2
    out = general_reduction(s)
    assert out is not None and out.rank == 2
    assert all(t.alpha == al for t in out.terms)
    assert (scheme_tensor(out) == scheme_tensor(s)).all()


def test_general_reduction_absent_on_standard():
    assert general_reduction(standard_scheme(2, 2, 2)) is None


def test_general_reduction_fires_when_pairwise_does():
    s = Scheme(2, 2, 2, ((1, 2, 4), (1, 2, 8), (3, 3, 3)))
    out = general_reduction(s)
    assert out is not None and out.rank == 2


def test_general_reduction_groups_are_ordered():
    s = standard_scheme(2, 2, 2)
    groups = reduction_groups(s)
    slots = [g[0] for g in groups]
    assert slots == sorted(slots)
    with pytest.raises(MoveError):
        apply_general_reduction(s, Slot.ALPHA, [0, 1])


def test_plus_counts_and_examples():
    s = standard_scheme(2, 2, 2)
    assert [tuple(m) for m in enumerate_plus_pairs(s)] == plus_oracle(s)
    st_ = strassen_scheme()
    assert len(enumerate_plus_pairs(st_)) == len(plus_oracle(st_))
    same = Scheme(2, 2, 2, ((1, 1, 1), (1, 1, 1)))
    assert enumerate_plus_pairs(same) == []
    i = s.terms.index((a(1, 1), b(1, 1), c(1, 1)))
    j = s.terms.index((a(2, 2), b(2, 2), c(2, 2)))
    out = apply_plus(s, PlusMove(i, j, Slot.ALPHA))
    assert out.rank == 9 and verify(out)
    changed = [k for k in range(out.rank) if k >= s.rank or out.terms[k] != s.terms[k]]
    assert changed == [i, j, 8]


def test_plus_is_undone_within_one_flip_and_reduction():
    rng = random.Random(8)
    for s in scheme_corpus(25, 9, [(2, 2, 2), (2, 2, 3)], max_steps=15):
        mv = rng.choice(enumerate_plus_pairs(s))
        p = apply_plus(s, mv)
        found = False
        for f in enumerate_flips(p):
            q = apply_flip(p, f)
            for i, j, _ in find_pairwise_reductions(q):
                if apply_pairwise_reduction(q, i, j).rank == s.rank:
                    found = True
                    break
            if found:
                break
        assert found


def test_split_example_and_errors():
    s = standard_scheme(2, 2, 2)
    i = s.terms.index((a(1, 1), b(1, 1), c(1, 1)))
    out = apply_split(s, i, Slot.ALPHA, a(2, 2))
    assert out.terms[i] == (a(2, 2), b(1, 1), c(1, 1))
    assert out.terms[-1] == (a(1, 1) ^ a(2, 2), b(1, 1), c(1, 1))
    assert verify(out) and out.rank == s.rank + 1
    with pytest.raises(MoveError):
        apply_split(s, i, Slot.ALPHA, a(1, 1))
    with pytest.raises(MoveError):
        apply_split(s, i, Slot.ALPHA, 0)
    with pytest.raises(MoveError):
        apply_split(s, i, Slot.ALPHA, a(1, 1) ^ a(2, 2))


def _random_move(s, rng):
    kind = rng.randrange(5)
    if kind <= 1:
        fl = enumerate_flips(s)
        if fl:
            return "flip", apply_flip(s, rng.choice(fl))
    if kind == 2:
        pl = enumerate_plus_pairs(s)
        if pl and s.rank < 40:
            return "plus", apply_plus(s, rng.choice(pl))
    if kind == 3 and s.rank < 40:
        idx = rng.randrange(s.rank)
        slot = rng.randrange(3)
        donors = sorted({t[slot] for t in s.terms} - {s.terms[idx][slot]})
        if donors:
            return "split", apply_split(s, idx, slot, rng.choice(donors))
    red = find_pairwise_reductions(s)
    if red:
        i, j, _ = rng.choice(red)
        return "reduce", apply_pairwise_reduction(s, i, j)
    g = general_reduction(s)
    if g is not None:
        return "greduce", g
    return None, s


@pytest.mark.parametrize("dims", [(2, 2, 2), (2, 3, 2), (3, 3, 3)])
def test_random_move_sequences_preserve_the_tensor(dims):
    rng = random.Random(hash(dims) & 0xFFFF)
    s = standard_scheme(*dims)
    for _ in range(1000):
        kind, t = _random_move(s, rng)
        if kind is None:
            continue
        delta = t.rank - s.rank
        expected = {"flip": {0}, "plus": {1}, "split": {1}, "reduce": {-1, -2}}.get(kind)
        if expected is not None:
            assert delta in expected
        else:
            assert delta < 0
        assert t.is_well_formed()
        assert verify(t), kind
        s = t
    assert component_ranks(s) == s.lengths


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([(2, 2, 2), (2, 2, 3), (3, 2, 2)]))
def test_enumerations_match_oracles_along_walks(seed, dims):
    rng = random.Random(seed)
    s = random_walk(standard_scheme(*dims), rng.randint(0, 30), rng)
    if s.rank <= 12:
        assert [tuple(f) for f in enumerate_flips(s)] == flip_oracle(s)
        assert [tuple(m) for m in enumerate_plus_pairs(s)] == plus_oracle(s)


def test_active_subset_restricts_enumeration():
    s = standard_scheme(2, 2, 2)
    act = [0, 1, 2, 3]
    for f in enumerate_flips(s, act):
        assert f.i in act and f.j in act
    with pytest.raises(IndexError):
        enumerate_flips(s, [99])
