"""Flip graph edges: flips, reductions, plus transitions and splits.

Every function here is pure: it takes a scheme and returns a new one. A move
that names a slot uses the cyclic role order alpha -> beta -> gamma -> alpha;
for slot ``s`` the "next" slot is ``(s + 1) % 3`` and the "third" slot is
``(s + 2) % 3``.
"""

from __future__ import annotations

from enum import IntEnum
from typing import Collection, Dict, List, NamedTuple, Optional, Sequence, Tuple

from flipgraph.gf2 import GF2Matrix, gf2_rank_one_factorization, outer
from flipgraph.scheme import Scheme, Term


class Slot(IntEnum):
    ALPHA = 0
    BETA = 1
    GAMMA = 2

    @property
    def next(self) -> "Slot":
        return Slot((self + 1) % 3)

    @property
    def third(self) -> "Slot":
        return Slot((self + 2) % 3)


class MoveError(ValueError):
    """A move's precondition does not hold for the given scheme."""


class FlipMove(NamedTuple):
    slot: Slot
    i: int
    j: int


class PlusMove(NamedTuple):
    i: int
    j: int
    slot: Slot


def _roles(slot: int) -> Tuple[int, int, int]:
    return slot, (slot + 1) % 3, (slot + 2) % 3


def _make_term(values: Dict[int, int]) -> Term:
    return Term(values[0], values[1], values[2])


def _active_indices(s: Scheme, active: Optional[Collection[int]]) -> List[int]:
    if active is None:
        return list(range(len(s.terms)))
    idx = sorted(set(active))
    if idx and (idx[0] < 0 or idx[-1] >= len(s.terms)):
        raise IndexError("active index out of range")
    return idx


def shared_slots(t: Term, u: Term) -> Tuple[int, ...]:
    return tuple(k for k in range(3) if t[k] == u[k])


def is_valid_flip(s: Scheme, mv: FlipMove) -> bool:
    if mv.i == mv.j or not (0 <= mv.i < len(s.terms) and 0 <= mv.j < len(s.terms)):
        return False
    sh, nx, th = _roles(mv.slot)
    ti, tj = s.terms[mv.i], s.terms[mv.j]
    return ti[sh] == tj[sh] and ti[nx] != tj[nx] and ti[th] != tj[th]


def enumerate_flips(s: Scheme, active: Optional[Collection[int]] = None) -> List[FlipMove]:
    idx = _active_indices(s, active)
    moves = []
    for slot in Slot:
        for i in idx:
            for j in idx:
                if i != j:
                    mv = FlipMove(slot, i, j)
                    if is_valid_flip(s, mv):
                        moves.append(mv)
    return moves


def apply_flip(s: Scheme, mv: FlipMove) -> Scheme:
    if not is_valid_flip(s, mv):
        raise MoveError(f"invalid flip {mv}")
    sh, nx, th = _roles(mv.slot)
    terms = list(s.terms)
    ti = list(terms[mv.i])
    tj = list(terms[mv.j])
    ti[nx] ^= tj[nx]
    tj[th] ^= ti[th]
    terms[mv.i] = Term(*ti)
    terms[mv.j] = Term(*tj)
    return s.with_terms(terms)


def find_pairwise_reductions(
    s: Scheme, active: Optional[Collection[int]] = None
) -> List[Tuple[int, int, Tuple[int, ...]]]:
    idx = _active_indices(s, active)
    out = []
    for a, i in enumerate(idx):
        for j in idx[a + 1 :]:
            sh = shared_slots(s.terms[i], s.terms[j])
            if len(sh) >= 2:
                out.append((i, j, sh))
    return out


def apply_pairwise_reduction(s: Scheme, i: int, j: int) -> Scheme:
    """Merge two terms sharing at least two components.

    The merged term takes term ``i``'s position; if the differing component
    cancels (exact duplicates) both terms disappear.
    """
    if i == j:
        raise MoveError("reduction needs two distinct terms")
    ti, tj = s.terms[i], s.terms[j]
    sh = shared_slots(ti, tj)
    if len(sh) < 2:
        raise MoveError(f"terms {i} and {j} share only slots {sh}")
    terms = list(s.terms)
    if len(sh) == 3:
        for k in sorted((i, j), reverse=True):
            del terms[k]
        return s.with_terms(terms)
    diff = ({0, 1, 2} - set(sh)).pop()
    merged = list(ti)
    merged[diff] ^= tj[diff]
    terms[i] = Term(*merged)
    del terms[j]
    return s.with_terms(terms)


def reduction_groups(
    s: Scheme, active: Optional[Collection[int]] = None
) -> List[Tuple[Slot, List[int]]]:
    """Groups of >= 2 active terms with equal slot component.

    Ordered by slot, then by the index of each group's first member.
    """
    idx = _active_indices(s, active)
    groups = []
    for slot in Slot:
        seen: Dict[int, List[int]] = {}
        for i in idx:
            seen.setdefault(s.terms[i][slot], []).append(i)
        for members in seen.values():
            if len(members) >= 2:
                groups.append((slot, members))
    return groups


def group_matrix(s: Scheme, slot: int, members: Sequence[int]) -> GF2Matrix:
    """Sum over the group of outer(next component, third component)."""
    _, nx, th = _roles(slot)
    lengths = s.lengths
    rows = [0] * lengths[nx]
    for i in members:
        t = s.terms[i]
        for q, r in enumerate(outer(t[nx], t[th], lengths[nx])):
            rows[q] ^= r
    return GF2Matrix(tuple(rows), lengths[th])


def apply_general_reduction(s: Scheme, slot: int, members: Sequence[int]) -> Scheme:
    """Replace a group sharing ``slot`` by a rank-one factorization of its sum.

    The new terms occupy the group's lowest positions in pivot order; the
    remaining group members are removed.
    """
    members = sorted(members)
    if len(members) < 2 or len(set(members)) != len(members):
        raise MoveError("a reduction group needs at least two distinct terms")
    shared = s.terms[members[0]][slot]
    if any(s.terms[i][slot] != shared for i in members):
        raise MoveError(f"group members do not share slot {Slot(slot).name}")
    sh, nx, th = _roles(slot)
    pairs = gf2_rank_one_factorization(group_matrix(s, slot, members))
    if len(pairs) >= len(members):
        raise MoveError("group sum has full rank; nothing to reduce")
    new_terms = [_make_term({sh: shared, nx: col.bits, th: row.bits}) for col, row in pairs]
    terms: List[Optional[Term]] = list(s.terms)
    for pos, t in zip(members, new_terms):
        terms[pos] = t
    for pos in members[len(new_terms) :]:
        terms[pos] = None
    return s.with_terms(t for t in terms if t is not None)


def general_reduction(s: Scheme, active: Optional[Collection[int]] = None) -> Optional[Scheme]:
    """First group (in scan order) whose summed outer products are rank deficient."""
    for slot, members in reduction_groups(s, active):
        mat = group_matrix(s, slot, members)
        if len(gf2_rank_one_factorization(mat)) < len(members):
            return apply_general_reduction(s, slot, members)
    return None


def is_valid_plus(s: Scheme, mv: PlusMove) -> bool:
    if mv.i == mv.j or not (0 <= mv.i < len(s.terms) and 0 <= mv.j < len(s.terms)):
        return False
    return not shared_slots(s.terms[mv.i], s.terms[mv.j])


def enumerate_plus_pairs(s: Scheme, active: Optional[Collection[int]] = None) -> List[PlusMove]:
    idx = _active_indices(s, active)
    moves = []
    for i in idx:
        for j in idx:
            if i != j and not shared_slots(s.terms[i], s.terms[j]):
                for slot in Slot:
                    moves.append(PlusMove(i, j, slot))
    return moves


def apply_plus(s: Scheme, mv: PlusMove) -> Scheme:
    """Split term ``j`` by term ``i``'s slot component, then flip.

    Terms ``i`` and ``j`` are rewritten in place and the third product is
    appended at the end.
    """
    if not is_valid_plus(s, mv):
        raise MoveError(f"invalid plus {mv}")
    sh, nx, th = _roles(mv.slot)
    ti, tj = s.terms[mv.i], s.terms[mv.j]
    new_i = _make_term({sh: ti[sh], nx: ti[nx] ^ tj[nx], th: ti[th]})
    new_j = _make_term({sh: ti[sh], nx: tj[nx], th: tj[th] ^ ti[th]})
    extra = _make_term({sh: tj[sh] ^ ti[sh], nx: tj[nx], th: tj[th]})
    terms = list(s.terms)
    terms[mv.i] = new_i
    terms[mv.j] = new_j
    terms.append(extra)
    return s.with_terms(terms)


def apply_split(s: Scheme, idx: int, slot: int, donor: int) -> Scheme:
    """Replace a term's slot component by ``donor``; append the remainder term."""
    if not 0 <= idx < len(s.terms):
        raise MoveError(f"term index {idx} out of range")
    t = s.terms[idx]
    if donor == 0:
        raise MoveError("donor must be nonzero")
    if donor == t[slot]:
        raise MoveError("donor equals the component being split")
    if all(u[slot] != donor for u in s.terms):
        raise MoveError("donor is not a component of the scheme")
    kept = list(t)
    kept[slot] = donor
    rest = list(t)
    rest[slot] = t[slot] ^ donor
    terms = list(s.terms)
    terms[idx] = Term(*kept)
    terms.append(Term(*rest))
    return s.with_terms(terms)
